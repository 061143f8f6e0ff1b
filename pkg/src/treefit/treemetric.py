"""Tree-metric fitting by reduction to ultrametric fitting.

For a pivot a with heights h_i = D(a,i) and M = max h_i, the transformed
distances M - (h_i + h_j - D(i,j))/2 need an ultrametric that stays above the
per-point floors beta_i = M - h_i and pins the pivot at gamma = M. The floors
are enforced after an unrestricted fit by clipping, which neither breaks the
ultrametric property nor increases the error. Mapping back yields a tree in
which the pivot's distances are preserved exactly.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Mapping

from .core import (
    DistanceMatrix,
    FittedTree,
    Pair,
    UltraNode,
    UltrametricTree,
    WeightedTree,
    all_pairs,
    canon_pair,
    lookup_pair,
    lp_norm_error,
)
from .ultrametric import fit_ultrametric

RESTRICTION_TOL = 1e-6


@dataclass(frozen=True)
class RestrictedInstance:
    """Pivot, cap, per-point floors, and the transformed matrix."""

    pivot: str
    gamma: float
    betas: dict[str, float]
    heights: dict[str, float]
    transformed: DistanceMatrix

    def __post_init__(self):
        for lab, beta in self.betas.items():
            if beta > self.gamma + RESTRICTION_TOL:
                raise ValueError(f"floor for {lab!r} exceeds the cap")


def gromov_transform(d: DistanceMatrix, pivot: str) -> RestrictedInstance:
    """Pivot-based transform of a distance matrix into (almost) an ultrametric."""
    if pivot not in d.labels:
        raise ValueError(f"pivot {pivot!r} is not a label")
    heights = {lab: (0.0 if lab == pivot else d.value(pivot, lab))
               for lab in d.labels}
    m = max(heights.values())
    betas = {lab: m - h for lab, h in heights.items()}
    betas[pivot] = m
    idx = d.index
    out = {}
    for i, j, v in d.pairs():
        if pivot in (i, j):
            out[(i, j)] = m
        else:
            out[(i, j)] = m - (heights[i] + heights[j] - v) / 2.0
    transformed = DistanceMatrix(d.labels, {
        canon_pair(idx, i, j): v for (i, j), v in out.items()})
    return RestrictedInstance(pivot=pivot, gamma=m, betas=betas,
                              heights=heights, transformed=transformed)


def squeeze(d_in: DistanceMatrix, r: RestrictedInstance) -> DistanceMatrix:
    """Clip every value into [max(beta_i, beta_j), gamma]."""
    if d_in.labels != r.transformed.labels:
        raise ValueError("matrix labels do not match the instance")
    out = {}
    for i, j, v in d_in.pairs():
        out[(i, j)] = min(r.gamma, max(v, r.betas[i], r.betas[j]))
    return DistanceMatrix(d_in.labels, out)


def clamp_to_restricted(u: Mapping[Pair, float],
                        r: RestrictedInstance) -> dict[Pair, float]:
    """Force an ultrametric to satisfy the floors and the cap; stays ultrametric."""
    labels = r.transformed.labels
    idx = r.transformed.index
    out = {}
    for i, j in all_pairs(labels):
        v = lookup_pair(u, i, j)
        out[canon_pair(idx, i, j)] = min(r.gamma, max(v, r.betas[i], r.betas[j]))
    return out


def restricted_to_tree(u: Mapping[Pair, float], r: RestrictedInstance,
                       d: DistanceMatrix) -> WeightedTree:
    """Invert the pivot transform: T(i,j) = 2 U(i,j) - 2 gamma + h_i + h_j.

    Realized on the ultrametric tree of U: a node merging pairs at value v
    sits at path-distance gamma - v from the pivot, and each species hangs at
    total path-distance h_i. Zero-weight edges may appear (pseudometric).
    """
    labels = r.transformed.labels
    for i, j in all_pairs(labels):
        v = lookup_pair(u, i, j)
        if v > r.gamma + RESTRICTION_TOL or v < max(r.betas[i], r.betas[j]) - RESTRICTION_TOL:
            raise ValueError(f"pair ({i},{j}) violates the restriction")
        if r.pivot in (i, j) and abs(v - r.gamma) > RESTRICTION_TOL:
            raise ValueError("pivot distances must equal the cap")
    utree = UltrametricTree.from_map(labels, u, tol=RESTRICTION_TOL)
    if abs(utree.top_distance() - r.gamma) > RESTRICTION_TOL:
        raise ValueError("top of the fitted tree does not reach the cap")

    edges: list[tuple[str, str, float]] = []
    label_set = set(labels)
    fresh = (name for name in (f"v{k}" for k in itertools.count())
             if name not in label_set)

    def walk(node: UltraNode, parent_name: str | None, parent_depth: float) -> None:
        if node.is_leaf:
            lab = node.label
            assert lab is not None
            if lab == r.pivot:
                return  # the pivot is the root itself
            assert parent_name is not None
            edges.append((parent_name, lab, r.heights[lab] - parent_depth))
            return
        depth = r.gamma - 2.0 * node.height
        if parent_name is None:
            name = r.pivot
            depth = 0.0
        else:
            name = next(fresh)
            edges.append((parent_name, name, depth - parent_depth))
        for child in node.children:
            walk(child, name, depth)

    walk(utree.root, None, 0.0)
    weights = [max(0.0, w) if w > -RESTRICTION_TOL else w for _, _, w in edges]
    for w in weights:
        if w < 0:
            raise ValueError("restriction violation produced a negative edge")
    cleaned = tuple((a, b, max(0.0, w)) for (a, b, _), w in zip(edges, weights))
    return WeightedTree(labels=d.labels, edges=cleaned, root=r.pivot)


def pseudometric_to_metric(tree: WeightedTree, d: DistanceMatrix,
                           alpha: float) -> WeightedTree:
    """Contract zero edges, then hang coinciding species on tiny private stems.

    The stem length alpha * d_min / (8 n) keeps the error within a (1 + alpha)
    factor for every norm; exact fits pass through unchanged.
    """
    if not 0 < alpha <= 1:
        raise ValueError("alpha must be in (0, 1]")
    # union nodes across zero-weight edges
    parent: dict[str, str] = {}

    def find(x: str) -> str:
        parent.setdefault(x, x)
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b, w in tree.edges:
        find(a), find(b)
        if w == 0.0:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[rb] = ra
    # contract: single-species groups keep the species name; groups hosting
    # several species become fresh hubs and every species gets its own stem
    groups: dict[str, list[str]] = {}
    for node in parent:
        groups.setdefault(find(node), []).append(node)
    label_set = set(tree.labels)
    taken = {node for a, b, _ in tree.edges for node in (a, b)} | label_set
    fresh = (f"hub{k}" for k in itertools.count())
    rep: dict[str, str] = {}
    pending: dict[str, list[str]] = {}
    for root, members in sorted(groups.items()):
        species = sorted(m for m in members if m in label_set)
        if len(species) == 1:
            name = species[0]
        elif len(species) > 1:
            name = next(n for n in fresh if n not in taken)
            pending[name] = species
        else:
            name = sorted(members)[0]
        for m in members:
            rep[m] = name

    edges = [(rep[a], rep[b], w) for a, b, w in tree.edges if rep[a] != rep[b]]
    if pending:
        realized = tree.distance_map()
        gaps = [abs(realized[pair] - v)
                for (i, j, v) in d.pairs()
                for pair in [canon_pair(d.index, i, j)]
                if abs(realized[pair] - v) > 0]
        if not gaps:
            raise ValueError("coinciding species cannot occur in an exact fit")
        eps = alpha * min(gaps) / (8.0 * len(d.labels))
        for name, species in sorted(pending.items()):
            for lab in species:
                edges.append((name, lab, eps))
    root = rep.get(tree.root, None) if tree.root else None
    return WeightedTree(labels=d.labels, edges=tuple(edges), root=root)


def fit_tree_metric(d: DistanceMatrix, *, pivot_mode: str = "all",
                    pivot: str | None = None, strategy: str = "pivot-sweep",
                    seed: int | None = None, backend: str = "auto",
                    feas_tol: float = 1e-7) -> FittedTree:
    """Fit a weighted tree spanning the labels, minimizing total error.

    pivot_mode "all" tries every label as the pivot and keeps the best
    candidate (the approximation guarantee needs this); "fixed" uses one
    pivot and is faster but forfeits the guarantee.
    """
    if pivot_mode not in ("all", "fixed"):
        raise ValueError(f"unknown pivot_mode {pivot_mode!r}")
    if d.n == 1:
        tree = WeightedTree(labels=d.labels, edges=(), root=d.labels[0])
        return FittedTree(kind="tree", tree=tree, l1_error=0.0,
                          lp_lower_bound=0.0, num_levels=0,
                          details={"pivot": d.labels[0], "per_pivot_error": {},
                                   "pre_fix_error": 0.0})
    if pivot_mode == "fixed":
        if pivot is None or pivot not in d.labels:
            raise ValueError("fixed pivot_mode needs a valid pivot label")
        pivots: tuple[str, ...] = (pivot,)
    else:
        pivots = d.labels

    best: tuple[float, str, WeightedTree, FittedTree] | None = None
    per_pivot: dict[str, float] = {}
    for a in pivots:
        r = gromov_transform(d, a)
        squeezed = squeeze(r.transformed, r)
        sub = fit_ultrametric(squeezed, strategy=strategy, seed=seed,
                              backend=backend, feas_tol=feas_tol)
        assert isinstance(sub.tree, UltrametricTree)
        clamped = clamp_to_restricted(sub.tree.distance_map(), r)
        candidate = restricted_to_tree(clamped, r, d)
        err = lp_norm_error(candidate, d, 1)
        per_pivot[a] = err
        if best is None or err < best[0]:
            best = (err, a, candidate, sub)
    assert best is not None
    err, chosen, tree, sub = best
    fixed = pseudometric_to_metric(tree, d, 1.0 / len(d.labels))
    final_err = lp_norm_error(fixed, d, 1)
    return FittedTree(kind="tree", tree=fixed, l1_error=final_err,
                      lp_lower_bound=sub.lp_lower_bound,
                      num_levels=sub.num_levels,
                      details={"pivot": chosen, "per_pivot_error": per_pivot,
                               "pre_fix_error": err})
