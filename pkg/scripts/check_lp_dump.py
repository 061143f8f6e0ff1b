#!/usr/bin/env python3
"""Independent checker for treefit LP dumps.

Reads a plain-text dump (variables with solved values, objective, one
constraint per line, bounds) and re-verifies everything with its own
arithmetic. Exits 0 when the dump is consistent, 1 otherwise. Deliberately
does not import the treefit package.
"""
import re
import sys

TOL = 1e-6
TERM = re.compile(r"^(-?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)\*(\S+)$")


def fail(msg):
    print(f"check_lp_dump: FAIL: {msg}")
    return 1


def parse_terms(expr):
    terms = []
    const = 0.0
    for raw in expr.split(" + "):
        raw = raw.strip()
        m = TERM.match(raw)
        if m:
            terms.append((float(m.group(1)), m.group(2)))
        else:
            const += float(raw)
    return terms, const


def main(argv):
    if len(argv) != 2:
        print("usage: check_lp_dump.py <dump-file>")
        return 2
    values = {}
    objective_stated = None
    objective_terms = None
    constraints = []
    with open(argv[1]) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("var "):
                name, _, value = line[4:].partition(" = ")
                values[name.strip()] = float(value)
            elif line.startswith("min:"):
                objective_terms = parse_terms(line[4:].strip())
            elif line.startswith("subject_to"):
                _, _, rest = line.partition(":")
                lhs, _, rhs = rest.partition("<=")
                constraints.append((parse_terms(lhs.strip()), float(rhs)))
            elif line.startswith("objective_value:"):
                objective_stated = float(line.split(":", 1)[1])
            elif line.startswith("bounds:"):
                continue
            else:
                return fail(f"unrecognized line: {line!r}")
    if not values:
        print("check_lp_dump: OK (no variables; nothing to verify)")
        return 0
    for name, v in values.items():
        if v < -TOL or v > 1.0 + TOL:
            return fail(f"{name} = {v} outside [0, 1]")
    worst = 0.0
    for (terms, const), rhs in constraints:
        lhs = const + sum(coef * values[name] for coef, name in terms)
        worst = max(worst, lhs - rhs)
        if lhs > rhs + TOL:
            return fail(f"constraint violated by {lhs - rhs:.3e}")
    if objective_terms is not None and objective_stated is not None:
        terms, const = objective_terms
        recomputed = const + sum(coef * values[name] for coef, name in terms)
        if abs(recomputed - objective_stated) > TOL * (1.0 + abs(recomputed)):
            return fail(
                f"objective mismatch: stated {objective_stated}, got {recomputed}")
    print(f"check_lp_dump: OK ({len(values)} vars, {len(constraints)} constraints,"
          f" worst slack {worst:.3e})")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
