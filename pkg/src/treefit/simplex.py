"""Dense primal simplex for small LPs of the form min c.x, A x <= b, 0 <= x <= u.

Upper bounds are appended as explicit rows, so the origin is always a basic
feasible starting point for the instances this package builds (b >= 0).
Entering variables follow the most-negative-reduced-cost rule; the leaving
row is chosen by the lexicographic ratio test, which rules out cycling on the
heavily degenerate bases these LPs start from.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PIVOT_TOL = 1e-9
LEX_TOL = 1e-12


class SimplexTooLarge(RuntimeError):
    """The dense tableau would not fit in the configured memory budget."""


class SimplexStall(RuntimeError):
    """Iteration cap reached; carries the best feasible point found so far."""

    def __init__(self, message: str, x: np.ndarray, objective: float, iterations: int):
        super().__init__(message)
        self.x = x
        self.objective = objective
        self.iterations = iterations


@dataclass
class SimplexResult:
    x: np.ndarray
    objective: float
    iterations: int


def solve_dense(c, a, b, upper=None, *, iteration_cap: int | None = None,
                max_tableau_entries: int = 20_000_000) -> SimplexResult:
    """Minimize c.x subject to a x <= b, 0 <= x <= upper (default 1).

    b must be nonnegative so that x = 0 is feasible.
    """
    c = np.asarray(c, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    nvars = c.shape[0]
    if upper is None:
        upper = np.ones(nvars)
    else:
        upper = np.asarray(upper, dtype=float)
    if np.any(b < 0):
        raise ValueError("rhs must be nonnegative (origin must be feasible)")

    m = a.shape[0] + nvars
    ncols = nvars + m
    if (m + 1) * (ncols + 1) > max_tableau_entries:
        raise SimplexTooLarge(
            f"tableau of {(m + 1)} x {(ncols + 1)} exceeds the dense budget")
    if iteration_cap is None:
        iteration_cap = 10 * m

    tableau = np.zeros((m + 1, ncols + 1))
    tableau[: a.shape[0], :nvars] = a
    tableau[a.shape[0] : m, :nvars] = np.eye(nvars)
    tableau[:m, nvars : nvars + m] = np.eye(m)
    tableau[: a.shape[0], -1] = b
    tableau[a.shape[0] : m, -1] = upper
    tableau[-1, :nvars] = c

    basis = list(range(nvars, nvars + m))
    # lexicographic comparison order: rhs, then the initially-basic (slack)
    # columns whose identity block makes every row lex-positive, then the rest
    lex_order = [ncols] + list(range(nvars, ncols)) + list(range(nvars))
    iterations = 0
    buf = np.empty_like(tableau)
    factor = np.empty(m + 1)

    while True:
        reduced = tableau[-1, :ncols]
        entering = int(np.argmin(reduced))
        if reduced[entering] >= -PIVOT_TOL:
            break
        if iterations >= iteration_cap:
            x = _extract(tableau, basis, nvars, m)
            raise SimplexStall("iteration cap reached", x, float(c @ x), iterations)

        col = tableau[:m, entering]
        rhs = tableau[:m, -1]
        positive = col > PIVOT_TOL
        if not positive.any():
            # cannot happen for the box-bounded LPs built here
            raise RuntimeError("LP is unbounded")
        ratios = np.full(m, np.inf)
        ratios[positive] = rhs[positive] / col[positive]
        best = ratios.min()
        candidates = np.nonzero(ratios <= best + LEX_TOL)[0]
        if len(candidates) == 1:
            leaving = int(candidates[0])
        else:
            leaving = _lex_leaving(tableau, candidates, entering, lex_order)

        pivot = tableau[leaving, entering]
        row = tableau[leaving]
        np.divide(row, pivot, out=row)
        np.copyto(factor, tableau[:, entering])
        factor[leaving] = 0.0
        np.multiply(factor[:, None], row[None, :], out=buf)
        np.subtract(tableau, buf, out=tableau)
        tableau[:, entering] = 0.0
        tableau[leaving, entering] = 1.0
        basis[leaving] = entering
        iterations += 1

    x = _extract(tableau, basis, nvars, m)
    return SimplexResult(x=x, objective=float(c @ x), iterations=iterations)


def _lex_leaving(tableau: np.ndarray, candidates: np.ndarray, entering: int,
                 lex_order: list[int]) -> int:
    """Among tied rows, the one whose scaled row is lexicographically least."""
    cands = np.asarray(candidates)
    piv = tableau[cands, entering]
    for col in lex_order:
        vals = tableau[cands, col] / piv
        best = vals.min()
        keep = vals <= best + LEX_TOL
        cands = cands[keep]
        piv = piv[keep]
        if len(cands) == 1:
            break
    return int(cands[0])


def _extract(tableau: np.ndarray, basis: list[int], nvars: int, m: int) -> np.ndarray:
    x = np.zeros(nvars)
    for row, var in enumerate(basis):
        if var < nvars:
            x[var] = tableau[row, -1]
    return x
