"""Shared generators: planted ultrametrics, random tree metrics, partitions."""
from __future__ import annotations

import itertools
import random

import pytest

from treefit.core import DistanceMatrix, Partition, WeightedTree, all_pairs


def planted_ultrametric(rng: random.Random, labels, values) -> DistanceMatrix:
    """Random hierarchy realized with the given strictly increasing values."""
    labels = list(labels)
    values = list(values)
    groups = [{lab} for lab in labels]
    mapping: dict[tuple[str, str], float] = {}
    for t, value in enumerate(values):
        if t == len(values) - 1:
            merged = [set().union(*groups)]
        elif len(groups) <= 2:
            merged = [set(g) for g in groups]  # hold for the top merge
        else:
            rng.shuffle(groups)
            k = rng.randint(2, len(groups) - 1)
            merged = [set(g) for g in groups[:k]]
            for g in groups[k:]:
                merged[rng.randrange(k)] |= g
        for grp in merged:
            for i, j in itertools.combinations(sorted(grp), 2):
                key = (i, j)
                if key not in mapping:
                    mapping[key] = value
        groups = merged
    return DistanceMatrix.from_pairs(sorted(labels), mapping)


def random_ultrametric_map(rng: random.Random, labels) -> dict:
    """Random ultrametric with arbitrary positive heights (binary merges)."""
    groups = [[lab] for lab in labels]
    mapping = {}
    h = 0.0
    while len(groups) > 1:
        h += rng.uniform(0.05, 1.0)
        a = groups.pop(rng.randrange(len(groups)))
        b = groups.pop(rng.randrange(len(groups)))
        for i in a:
            for j in b:
                mapping[(i, j) if i < j else (j, i)] = h
        groups.append(a + b)
    return mapping


def random_tree_metric(rng: random.Random, n: int, lo=0.3, hi=3.0):
    """Distance matrix of a random positively weighted binary tree."""
    labels = [f"t{k:02d}" for k in range(n)]
    nodes = list(labels)
    edges = []
    counter = 0
    while len(nodes) > 1:
        rng.shuffle(nodes)
        a, b = nodes.pop(), nodes.pop()
        name = f"i{counter}"
        counter += 1
        edges.append((a, name, round(rng.uniform(lo, hi), 6)))
        edges.append((b, name, round(rng.uniform(lo, hi), 6)))
        nodes.append(name)
    tree = WeightedTree(labels=tuple(labels), edges=tuple(edges), root=nodes[0])
    return DistanceMatrix.from_pairs(labels, tree.distance_map()), tree


def random_partition(rng: random.Random, labels) -> Partition:
    k = rng.randint(1, len(labels))
    buckets: dict[int, set[str]] = {}
    for lab in labels:
        buckets.setdefault(rng.randrange(k), set()).add(lab)
    return Partition.from_parts(labels, buckets.values())


def random_hierarchy(rng: random.Random, labels, n_levels: int) -> list[Partition]:
    """A random refinement chain, finest level first."""
    chain = [random_partition(rng, labels)]
    for _ in range(n_levels - 1):
        prev = chain[-1]
        parts = list(prev.parts)
        rng.shuffle(parts)
        k = rng.randint(1, len(parts))
        merged: list[set[str]] = [set(p) for p in parts[:k]]
        for p in parts[k:]:
            merged[rng.randrange(k)] |= p
        chain.append(Partition.from_parts(labels, merged))
    return chain


def random_matrix(rng: random.Random, labels, choices) -> DistanceMatrix:
    values = {p: float(rng.choice(choices)) for p in all_pairs(tuple(labels))}
    return DistanceMatrix.from_pairs(labels, values)


def feasible_lp_maps(rng: random.Random, labels, n_levels: int) -> list[dict]:
    """Feasible fractional distances: scaled ultrametrics shifted per level.

    Clipping an ultrametric from below at 0 and above at 1 keeps the strong
    triangle inequality, and increasing shifts with the level keep the
    monotonicity constraint satisfied.
    """
    base = random_ultrametric_map(rng, sorted(labels))
    top = max(base.values())
    scale = rng.uniform(0.6, 1.6) / top
    shifts = sorted(rng.uniform(0.0, 0.8) for _ in range(n_levels))
    out = []
    for t in range(n_levels):
        shift = shifts[t]
        out.append({pair: min(1.0, max(0.0, v * scale - shift))
                    for pair, v in base.items()})
    out.reverse()  # larger shifts (smaller x) at higher levels
    return out


@pytest.fixture
def rng() -> random.Random:
    return random.Random(20240817)
