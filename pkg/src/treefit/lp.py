"""LP relaxation for hierarchical clustering instances and its cost algebra.

One variable x^(t)_{i,j} in [0,1] per level and unordered pair. Constraints:
per-level triangle inequalities and monotonicity across consecutive levels.
The objective charges x on in-edges and (1 - x) on non-edges, weighted per
level.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .core import EdgeSet, HierarchySequence, Pair, all_pairs, canon_pair, clique_edges
from .simplex import SimplexStall, SimplexTooLarge, solve_dense

DEFAULT_FEAS_TOL = 1e-7
DEFAULT_OPT_TOL = 1e-6

# above this many dense-tableau entries, auto solves switch to scipy's HiGHS
DENSE_TABLEAU_BUDGET = 1_200_000


class SolverError(RuntimeError):
    """LP solve failed; may carry the best feasible point found."""

    def __init__(self, message: str, best: "LpSolution | None" = None):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class HccInstance:
    """Level weights and per-level edge sets over a shared label universe."""

    labels: tuple[str, ...]
    deltas: tuple[float, ...]
    edge_sets: tuple[EdgeSet, ...]

    def __post_init__(self):
        if len(self.deltas) != len(self.edge_sets):
            raise ValueError("one weight per edge set required")
        if not self.deltas:
            raise ValueError("need at least one level")
        for d in self.deltas:
            if not d > 0:
                raise ValueError(f"level weights must be positive, got {d}")
        for es in self.edge_sets:
            if es.universe != self.labels:
                raise ValueError("edge set universe does not match the labels")

    @classmethod
    def from_partitions(cls, labels: Sequence[str], deltas: Sequence[float],
                        partitions) -> "HccInstance":
        """Instance whose edge sets are the clique edges of given partitions."""
        return cls(tuple(labels), tuple(float(d) for d in deltas),
                   tuple(clique_edges(q) for q in partitions))

    @property
    def n_levels(self) -> int:
        return len(self.deltas)

    @property
    def n(self) -> int:
        return len(self.labels)

    def pair_list(self) -> tuple[Pair, ...]:
        return tuple(all_pairs(self.labels))


@dataclass
class LinearProgram:
    """Explicit formulation: rows are `coeffs . x <= rhs`, x in [0,1]."""

    labels: tuple[str, ...]
    n_levels: int
    pairs: tuple[Pair, ...]
    rows: list[tuple[tuple[int, ...], tuple[float, ...]]]
    row_kinds: list[str]
    rhs: np.ndarray
    c: np.ndarray
    const: float

    @property
    def n_vars(self) -> int:
        return self.n_levels * len(self.pairs)

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def var_index(self, t: int, pair_idx: int) -> int:
        return t * len(self.pairs) + pair_idx

    def var_name(self, v: int) -> str:
        t, p = divmod(v, len(self.pairs))
        i, j = self.pairs[p]
        return f"x_t{t + 1}_{i}_{j}"

    def dense_matrix(self) -> np.ndarray:
        a = np.zeros((self.n_rows, self.n_vars))
        for r, (cols, coefs) in enumerate(self.rows):
            a[r, list(cols)] = coefs
        return a

    def sparse_matrix(self):
        from scipy.sparse import csr_matrix

        data, rows_ix, cols_ix = [], [], []
        for r, (cols, coefs) in enumerate(self.rows):
            for col, coef in zip(cols, coefs):
                rows_ix.append(r)
                cols_ix.append(col)
                data.append(coef)
        return csr_matrix((data, (rows_ix, cols_ix)),
                          shape=(self.n_rows, self.n_vars))

    def objective_value(self, x: np.ndarray) -> float:
        return float(self.c @ x + self.const)

    def dump_text(self, x: np.ndarray | None = None,
                  objective: float | None = None) -> str:
        """Plain-text equation list for cross-checking with an external solver."""
        lines = ["# lp-dump v1", f"# vars {self.n_vars} rows {self.n_rows}"]
        if x is not None:
            for v in range(self.n_vars):
                lines.append(f"var {self.var_name(v)} = {float(x[v])!r}")
        terms = " + ".join(
            f"{float(self.c[v])!r}*{self.var_name(v)}" for v in range(self.n_vars))
        lines.append(f"min: {terms} + {float(self.const)!r}")
        for (cols, coefs), kind in zip(self.rows, self.row_kinds):
            lhs = " + ".join(f"{float(coef)!r}*{self.var_name(col)}"
                             for col, coef in zip(cols, coefs))
            lines.append(f"subject_to[{kind}]: {lhs} <= 0.0")
        lines.append("bounds: 0 <= all_vars <= 1")
        if objective is not None:
            lines.append(f"objective_value: {float(objective)!r}")
        return "\n".join(lines) + "\n"


@dataclass
class LpSolution:
    """Fractional distances per level and pair, clamped into [0,1]."""

    labels: tuple[str, ...]
    pairs: tuple[Pair, ...]
    x: np.ndarray  # shape (n_levels, n_pairs)
    objective: float
    backend: str = "simplex"

    def __post_init__(self):
        object.__setattr__(self, "_pair_index",
                           {p: k for k, p in enumerate(self.pairs)})
        object.__setattr__(self, "_label_index",
                           {lab: k for k, lab in enumerate(self.labels)})

    @property
    def n_levels(self) -> int:
        return self.x.shape[0]

    def value(self, t: int, i: str, j: str) -> float:
        """x^(t)_{i,j} with level t 0-based; x_{i,i} is 0 by convention."""
        if i == j:
            return 0.0
        pair = canon_pair(self._label_index, i, j)  # type: ignore[attr-defined]
        return float(self.x[t, self._pair_index[pair]])  # type: ignore[attr-defined]

    def level_map(self, t: int) -> dict[Pair, float]:
        return {p: float(self.x[t, k]) for k, p in enumerate(self.pairs)}

    def max_violation(self) -> dict[str, float]:
        """Largest triangle / monotonicity / box violations of this point."""
        tri = 0.0
        labels = self.labels
        for t in range(self.n_levels):
            for i, j, k in itertools.combinations(labels, 3):
                xij = self.value(t, i, j)
                xik = self.value(t, i, k)
                xjk = self.value(t, j, k)
                tri = max(tri, xij - xik - xjk, xik - xij - xjk, xjk - xij - xik)
        mono = 0.0
        for t in range(self.n_levels - 1):
            mono = max(mono, float(np.max(self.x[t + 1] - self.x[t])))
        box = max(0.0, float(np.max(self.x - 1.0)), float(np.max(-self.x)))
        return {"triangle": tri, "monotone": mono, "box": box}


def build_lp(inst: HccInstance) -> LinearProgram:
    """Variables, triangle and monotonicity rows, and the level-weighted objective."""
    pairs = inst.pair_list()
    pair_index = {p: k for k, p in enumerate(pairs)}
    n_pairs = len(pairs)
    n_levels = inst.n_levels
    labels = inst.labels
    idx = {lab: k for k, lab in enumerate(labels)}

    rows: list[tuple[tuple[int, ...], tuple[float, ...]]] = []
    kinds: list[str] = []
    for t in range(n_levels):
        base = t * n_pairs
        for i, j, k in itertools.combinations(labels, 3):
            vij = base + pair_index[canon_pair(idx, i, j)]
            vik = base + pair_index[canon_pair(idx, i, k)]
            vjk = base + pair_index[canon_pair(idx, j, k)]
            rows.append(((vij, vik, vjk), (1.0, -1.0, -1.0)))
            rows.append(((vik, vij, vjk), (1.0, -1.0, -1.0)))
            rows.append(((vjk, vij, vik), (1.0, -1.0, -1.0)))
            kinds.extend(["triangle"] * 3)
    for t in range(n_levels - 1):
        for p in range(n_pairs):
            rows.append(((0 + (t + 1) * n_pairs + p, t * n_pairs + p),
                         (1.0, -1.0)))
            kinds.append("monotone")

    c = np.zeros(n_levels * n_pairs)
    const = 0.0
    for t in range(n_levels):
        delta = inst.deltas[t]
        edges = inst.edge_sets[t].edges
        for p, pair in enumerate(pairs):
            if pair in edges:
                c[t * n_pairs + p] = delta
            else:
                c[t * n_pairs + p] = -delta
                const += delta
    rhs = np.zeros(len(rows))
    return LinearProgram(labels=labels, n_levels=n_levels, pairs=pairs,
                         rows=rows, row_kinds=kinds, rhs=rhs, c=c, const=const)


def solve_lp(lp: LinearProgram, feas_tol: float = DEFAULT_FEAS_TOL, *,
             backend: str = "auto", iteration_cap: int | None = None) -> LpSolution:
    """Solve to optimality; the result is clamped into [0,1] and re-checked.

    backend "auto" uses the built-in dense simplex while the tableau fits the
    memory budget and scipy's HiGHS beyond that; both are deterministic.
    """
    if backend not in ("auto", "simplex", "highs"):
        raise ValueError(f"unknown backend {backend!r}")
    chosen = backend
    if backend == "auto":
        m = lp.n_rows + lp.n_vars
        entries = (m + 1) * (lp.n_vars + m + 1)
        chosen = "simplex" if entries <= DENSE_TABLEAU_BUDGET else "highs"

    if chosen == "simplex":
        try:
            res = solve_dense(lp.c, lp.dense_matrix(), lp.rhs,
                              iteration_cap=iteration_cap)
        except SimplexTooLarge as exc:
            raise SolverError(str(exc)) from exc
        except SimplexStall as exc:
            best = _finish(lp, exc.x, "simplex", feas_tol, check=False)
            raise SolverError("simplex hit its iteration cap", best) from exc
        x = res.x
    else:
        x = _solve_highs(lp)
    return _finish(lp, x, chosen, feas_tol)


def _solve_highs(lp: LinearProgram) -> np.ndarray:
    from scipy.optimize import linprog

    res = linprog(lp.c, A_ub=lp.sparse_matrix(), b_ub=lp.rhs,
                  bounds=(0.0, 1.0), method="highs")
    if not res.success:
        raise SolverError(f"highs failed: {res.message}")
    return np.asarray(res.x)


def _finish(lp: LinearProgram, x: np.ndarray, backend: str, feas_tol: float,
            check: bool = True) -> LpSolution:
    x = np.clip(x, 0.0, 1.0)
    sol = LpSolution(labels=lp.labels, pairs=lp.pairs,
                     x=x.reshape(lp.n_levels, len(lp.pairs)).copy(),
                     objective=lp.objective_value(x), backend=backend)
    if check:
        worst = max(sol.max_violation().values())
        if worst > feas_tol:
            raise SolverError(f"solution infeasible by {worst:.3e}", sol)
    return sol


# ---------------------------------------------------------------------------
# LP cost algebra
# ---------------------------------------------------------------------------

@dataclass
class LpCost:
    """Per-level, per-species and per-set LP costs of a fractional point."""

    inst: HccInstance
    sol: LpSolution
    pair_cost: np.ndarray = field(init=False)  # (n_levels, n_pairs)

    def __post_init__(self):
        pairs = self.sol.pairs
        n_levels = self.inst.n_levels
        cost = np.empty((n_levels, len(pairs)))
        for t in range(n_levels):
            delta = self.inst.deltas[t]
            edges = self.inst.edge_sets[t].edges
            for p, pair in enumerate(pairs):
                xv = self.sol.x[t, p]
                cost[t, p] = delta * xv if pair in edges else delta * (1.0 - xv)
        self.pair_cost = cost

    @property
    def per_level(self) -> tuple[float, ...]:
        return tuple(float(v) for v in self.pair_cost.sum(axis=1))

    @property
    def total(self) -> float:
        return float(self.pair_cost.sum())

    def species(self, t: int, i: str) -> float:
        """cost of all pairs containing species i at level t (0-based)."""
        return self.of_set(t, {i})

    def of_set(self, t: int, subset) -> float:
        subset = set(subset)
        total = 0.0
        for p, (i, j) in enumerate(self.sol.pairs):
            if i in subset or j in subset:
                total += self.pair_cost[t, p]
        return float(total)


def lp_cost(inst: HccInstance, sol: LpSolution) -> LpCost:
    if sol.labels != inst.labels:
        raise ValueError("solution labels do not match the instance")
    if sol.n_levels != inst.n_levels:
        raise ValueError("solution level count does not match the instance")
    return LpCost(inst, sol)


def cost_edges(edges: EdgeSet, x: Mapping[Pair, float]) -> float:
    """Unweighted LP cost of an arbitrary edge set against a level slice."""
    total = 0.0
    for pair in all_pairs(edges.universe):
        xv = x[pair]
        total += xv if pair in edges.edges else 1.0 - xv
    return total


def hierarchy_cost(inst: HccInstance, hierarchy: HierarchySequence) -> float:
    """Integral objective: sum_t delta^(t) |E^(t) sym-diff cliques(P^(t))|."""
    from .core import sym_diff_size

    if len(hierarchy) != inst.n_levels:
        raise ValueError("hierarchy level count does not match the instance")
    total = 0.0
    for t, part in enumerate(hierarchy.levels):
        total += inst.deltas[t] * sym_diff_size(inst.edge_sets[t], clique_edges(part))
    return total


def integral_solution(inst: HccInstance, hierarchy: HierarchySequence) -> LpSolution:
    """The 0/1 point encoding a hierarchical sequence; feasible by construction."""
    pairs = inst.pair_list()
    x = np.ones((inst.n_levels, len(pairs)))
    for t, part in enumerate(hierarchy.levels):
        for p, (i, j) in enumerate(pairs):
            if part.same_part(i, j):
                x[t, p] = 0.0
    sol = LpSolution(labels=inst.labels, pairs=pairs, x=x, objective=0.0,
                     backend="integral")
    sol.objective = float(np.sum([
        inst.deltas[t] * cost_edges(inst.edge_sets[t], sol.level_map(t))
        for t in range(inst.n_levels)]))
    return sol
