"""Exact brute-force solvers for desk-scale verification.

The hierarchical solvers run a dynamic program over the full partition
lattice: the objective splits per level, so the cheapest chain through the
refinement relation is found level by level instead of enumerating chains.
"""
from __future__ import annotations

from typing import Sequence

from .core import (
    DistanceMatrix,
    EdgeSet,
    HierarchySequence,
    Partition,
    UltrametricTree,
    canon_pair,
    clique_edges,
    iter_partitions,
    lp_norm_error,
    sym_diff_size,
)
from .lp import HccInstance
from .ultrametric import (
    TrivialInstance,
    hcc_instance_from_distances,
    hierarchy_to_ultrametric,
    star_tree,
)

CORR_CLUSTER_CAP = 9
ULTRAMETRIC_CAP = 7
HCA_CAP_N = 6
HCA_CAP_LEVELS = 3


def exact_corr_cluster(universe: Sequence[str], edges: EdgeSet) -> tuple[Partition, int]:
    """Minimum-disagreement partition by full enumeration; ties by first found."""
    universe = tuple(universe)
    if len(universe) > CORR_CLUSTER_CAP:
        raise ValueError(f"exact correlation clustering capped at n={CORR_CLUSTER_CAP}")
    if edges.universe != universe:
        raise ValueError("edge set universe does not match")
    best: Partition | None = None
    best_cost: int | None = None
    for parts in iter_partitions(universe):
        p = Partition(universe, parts)
        cost = sym_diff_size(edges, clique_edges(p))
        if best_cost is None or cost < best_cost:
            best, best_cost = p, cost
    assert best is not None and best_cost is not None
    return best, best_cost


def _refinement_table(partitions: list[Partition]) -> list[list[bool]]:
    owner_maps = []
    for p in partitions:
        owner = {}
        for k, part in enumerate(p.parts):
            for lab in part:
                owner[lab] = k
        owner_maps.append(owner)
    table = []
    for fine in partitions:
        row = []
        for owner in owner_maps:
            ok = all(len({owner[lab] for lab in part}) == 1 for part in fine.parts)
            row.append(ok)
        table.append(row)
    return table


def exact_hcc(inst: HccInstance, cap: int = ULTRAMETRIC_CAP) -> tuple[HierarchySequence, float]:
    """Exact optimum of the level-weighted hierarchical objective."""
    if inst.n > cap:
        raise ValueError(f"exact hierarchical solver capped at n={cap}")
    partitions = [Partition(inst.labels, parts)
                  for parts in iter_partitions(inst.labels)]
    refines = _refinement_table(partitions)
    n_levels = inst.n_levels
    level_cost = [
        [inst.deltas[t] * sym_diff_size(inst.edge_sets[t], clique_edges(p))
         for p in partitions]
        for t in range(n_levels)]

    n_parts = len(partitions)
    best_tail = level_cost[n_levels - 1][:]
    choice: list[list[int]] = [[-1] * n_parts for _ in range(n_levels)]
    for t in range(n_levels - 2, -1, -1):
        new_tail = [0.0] * n_parts
        for i in range(n_parts):
            best_j = -1
            best_val = None
            for j in range(n_parts):
                if refines[i][j]:
                    if best_val is None or best_tail[j] < best_val:
                        best_val, best_j = best_tail[j], j
            assert best_val is not None
            new_tail[i] = level_cost[t][i] + best_val
            choice[t][i] = best_j
        best_tail = new_tail
    start = min(range(n_parts), key=lambda i: best_tail[i])
    total = best_tail[start]
    chain = [start]
    for t in range(n_levels - 1):
        chain.append(choice[t][chain[-1]])
    hierarchy = HierarchySequence(tuple(partitions[i] for i in chain))
    return hierarchy, float(total)


def exact_hca(universe: Sequence[str], partitions: Sequence[Partition],
              deltas: Sequence[float]) -> tuple[HierarchySequence, float]:
    """Exact hierarchical agreement optimum (clique edge sets per level)."""
    universe = tuple(universe)
    if len(universe) > HCA_CAP_N:
        raise ValueError(f"exact agreement solver capped at n={HCA_CAP_N}")
    if len(partitions) > HCA_CAP_LEVELS:
        raise ValueError(f"exact agreement solver capped at {HCA_CAP_LEVELS} levels")
    inst = HccInstance.from_partitions(universe, deltas, partitions)
    return exact_hcc(inst, cap=HCA_CAP_N)


def exact_ultrametric_l1(d: DistanceMatrix) -> tuple[UltrametricTree, float]:
    """Best ultrametric restricted to input values; optimal overall for L1.

    Some optimal ultrametric uses only distances present in the input, so
    searching chains over the input's own levels is exact.
    """
    if d.n > ULTRAMETRIC_CAP:
        raise ValueError(f"exact ultrametric solver capped at n={ULTRAMETRIC_CAP}")
    try:
        inst, levels = hcc_instance_from_distances(d)
    except TrivialInstance as trivial:
        return star_tree(d.labels, trivial.levels.values[0]), 0.0
    hierarchy, _ = exact_hcc(inst, cap=ULTRAMETRIC_CAP)
    tree = hierarchy_to_ultrametric(hierarchy, levels)
    return tree, lp_norm_error(tree, d, 1)


# ---------------------------------------------------------------------------
# Flattening onto two distance values
# ---------------------------------------------------------------------------

def _interior_nodes(tree: UltrametricTree):
    """Internal nodes whose merge value lies strictly inside (1, 2).

    Yields (value, min_leaf, cross_pairs, parent_value, max_child_value),
    where cross_pairs are the label pairs meeting exactly at that node.
    """
    idx = {lab: k for k, lab in enumerate(tree.labels)}
    found = []

    def walk(node, parent_value: float) -> list[str]:
        if node.is_leaf:
            return [node.label]
        value = 2.0 * node.height
        groups = [walk(child, value) for child in node.children]
        if 1.0 < value < 2.0:
            cross = []
            for a in range(len(groups)):
                for b in range(a + 1, len(groups)):
                    cross.extend((i, j) for i in groups[a] for j in groups[b])
            max_child = max((2.0 * c.height for c in node.children
                             if not c.is_leaf), default=0.0)
            min_leaf = min(min(idx[x] for x in g) for g in groups)
            found.append((value, min_leaf, cross, parent_value, max_child))
        return [lab for g in groups for lab in g]

    walk(tree.root, 2.0)
    return found


def flatten_to_12(tree: UltrametricTree, d: DistanceMatrix) -> UltrametricTree:
    """Push all tree distances into {1, 2} without increasing the error vs d.

    Distances below 1 rise to 1 and above 2 drop to 2. Each remaining node
    with a merge value strictly inside (1, 2) then moves to its parent's
    value when at least half of its pairs prefer distance 2, and down onto
    its highest child otherwise; every move merges the node away, so the
    loop terminates with all values in {1, 2} and the error never increased.
    """
    for _, _, v in d.pairs():
        if v not in (1.0, 2.0):
            raise ValueError("reference distances must be exactly 1 or 2")
    if sorted(tree.labels) != sorted(d.labels):
        raise ValueError("tree labels do not match the distance matrix")
    idx = {lab: k for k, lab in enumerate(d.labels)}
    mapping = {}
    for pair, v in tree.distance_map().items():
        i, j = pair
        mapping[canon_pair(idx, i, j)] = min(2.0, max(1.0, v))
    while True:
        current = UltrametricTree.from_map(d.labels, mapping)
        interior = _interior_nodes(current)
        if not interior:
            return current
        value, _, cross, parent_value, max_child = min(
            interior, key=lambda item: (item[0], item[1]))
        ones = sum(1 for i, j in cross if d.value(i, j) == 1.0)
        twos = len(cross) - ones
        target = parent_value if twos >= ones else max(1.0, max_child)
        for i, j in cross:
            mapping[canon_pair(idx, i, j)] = target
