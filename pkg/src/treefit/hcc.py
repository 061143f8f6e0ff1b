"""Hierarchical correlation clustering driver.

Each level's edge set is first clustered independently; the resulting
partitions go through the hierarchical cluster agreement solver. The LP of
the original instance is solved separately so every run reports a true lower
bound next to the achieved cost.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .core import EdgeSet, HierarchySequence, Partition, clique_edges, sym_diff_size
from .corrclust import corr_cluster, corr_cluster_cost
from .hca import HcaResult, fit_hca_report, is_hierarchical
from .lp import HccInstance, LpSolution, build_lp, hierarchy_cost, solve_lp


@dataclass
class HccResult:
    hierarchy: HierarchySequence
    cost: float
    lp_lower_bound: float
    lp_solution: LpSolution | None
    partitions: tuple[Partition, ...]
    level_costs: tuple[int, ...]
    hca: HcaResult
    instance: HccInstance


def components_partition(edges: EdgeSet) -> Partition:
    """Connected components of the edge set, as a partition."""
    parent = {lab: lab for lab in edges.universe}

    def find(x: str) -> str:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j in edges.edges:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[rj] = ri
    groups: dict[str, set[str]] = {}
    for lab in edges.universe:
        groups.setdefault(find(lab), set()).add(lab)
    return Partition.from_parts(edges.universe, groups.values())


def _clique_hierarchy(inst: HccInstance) -> HierarchySequence | None:
    """If every E^(t) is a disjoint clique set and the levels nest, return it."""
    parts = []
    for es in inst.edge_sets:
        p = components_partition(es)
        if clique_edges(p).edges != es.edges:
            return None
        parts.append(p)
    if not is_hierarchical(parts):
        return None
    return HierarchySequence(tuple(parts))


def fit_hcc(inst: HccInstance, *, strategy: str = "pivot-sweep",
            seed: int | None = None, backend: str = "auto",
            feas_tol: float = 1e-7, fast_path: bool = True,
            lower_bound: bool = True) -> HccResult:
    """Cluster each level, then reconcile the levels into a hierarchy."""
    partitions = tuple(
        corr_cluster(inst.labels, es, strategy=strategy, seed=seed)
        for es in inst.edge_sets)
    level_costs = tuple(
        corr_cluster_cost(es, q) for es, q in zip(inst.edge_sets, partitions))
    hca = fit_hca_report(inst.labels, partitions, inst.deltas,
                         backend=backend, feas_tol=feas_tol, fast_path=fast_path)
    cost = hierarchy_cost(inst, hca.hierarchy)

    lp_solution = None
    bound = 0.0
    if lower_bound:
        if fast_path and _clique_hierarchy(inst) is not None:
            bound = 0.0  # integral zero-cost point is LP-optimal
        else:
            lp_solution = solve_lp(build_lp(inst), feas_tol, backend=backend)
            bound = lp_solution.objective
    return HccResult(hierarchy=hca.hierarchy, cost=cost, lp_lower_bound=bound,
                     lp_solution=lp_solution, partitions=partitions,
                     level_costs=level_costs, hca=hca, instance=inst)


def triangle_switch_holds(result: HccResult) -> bool:
    """|E sdiff P| <= |E sdiff Q| + |Q sdiff P| per level, always exact."""
    for t in range(result.instance.n_levels):
        e = result.instance.edge_sets[t]
        q = clique_edges(result.partitions[t])
        p = clique_edges(result.hierarchy.levels[t])
        if sym_diff_size(e, p) > sym_diff_size(e, q) + sym_diff_size(q, p):
            return False
    return True
