"""Shared domain types: distance matrices, edge sets, partitions and trees.

Labels are opaque strings; every iteration order in the package derives from
the order of first appearance of the labels, so all operations are
deterministic.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

Pair = tuple[str, str]

DEFAULT_TOL = 1e-9
VALUE_MERGE_TOL = 1e-12


class UniverseMismatch(ValueError):
    """Raised when two objects over different label universes are combined."""


def canon_pair(index: Mapping[str, int], i: str, j: str) -> Pair:
    """Order a label pair by label position so dicts hold one key per pair."""
    if i == j:
        raise ValueError(f"self-pair {i!r} is not a valid unordered pair")
    return (i, j) if index[i] < index[j] else (j, i)


def all_pairs(labels: Sequence[str]) -> Iterator[Pair]:
    return itertools.combinations(labels, 2)


def lookup_pair(mapping: Mapping, i: str, j: str) -> float:
    """Fetch a pair value from a dict keyed by tuples in either orientation."""
    try:
        return mapping[(i, j)]
    except KeyError:
        return mapping[(j, i)]


# ---------------------------------------------------------------------------
# Distance matrices
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DistanceMatrix:
    """Symmetric strictly-positive pairwise distances with ordered labels."""

    labels: tuple[str, ...]
    d: dict[Pair, float]

    def __post_init__(self):
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("duplicate labels")
        idx = {lab: k for k, lab in enumerate(self.labels)}
        object.__setattr__(self, "_index", idx)
        expected = {canon_pair(idx, i, j) for i, j in all_pairs(self.labels)}
        if set(self.d) != expected:
            missing = expected - set(self.d)
            extra = set(self.d) - expected
            raise ValueError(f"bad pair keys: missing={sorted(missing)[:3]} extra={sorted(extra)[:3]}")
        for pair, v in self.d.items():
            if not (v > 0.0) or not math.isfinite(v):
                raise ValueError(f"distance for {pair} must be finite and > 0, got {v}")

    @classmethod
    def from_pairs(cls, labels: Sequence[str], values: Mapping) -> "DistanceMatrix":
        """Build from any mapping keyed by 2-element tuples or frozensets."""
        labels = tuple(labels)
        idx = {lab: k for k, lab in enumerate(labels)}
        d: dict[Pair, float] = {}
        for key, v in values.items():
            i, j = tuple(key)
            d[canon_pair(idx, i, j)] = float(v)
        return cls(labels, d)

    @classmethod
    def from_array(cls, labels: Sequence[str], array) -> "DistanceMatrix":
        labels = tuple(labels)
        d = {}
        for a, b in all_pairs(range(len(labels))):
            d[(labels[a], labels[b])] = float(array[a][b])
        return cls(labels, d)

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def index(self) -> Mapping[str, int]:
        return self._index  # type: ignore[attr-defined]

    def value(self, i: str, j: str) -> float:
        return self.d[canon_pair(self._index, i, j)]  # type: ignore[attr-defined]

    def pairs(self) -> Iterator[tuple[str, str, float]]:
        """All pairs, ordered by label position."""
        for i, j in all_pairs(self.labels):
            yield i, j, self.d[(i, j)]

    def distinct_values(self, merge_tol: float = VALUE_MERGE_TOL) -> tuple[float, ...]:
        """Sorted distinct distances; values closer than merge_tol collapse."""
        out: list[float] = []
        for v in sorted(self.d.values()):
            if not out or v - out[-1] > merge_tol:
                out.append(v)
        return tuple(out)


# ---------------------------------------------------------------------------
# Edge sets and partitions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EdgeSet:
    """A set of unordered label pairs over a fixed universe."""

    universe: tuple[str, ...]
    edges: frozenset[Pair]

    def __post_init__(self):
        idx = {lab: k for k, lab in enumerate(self.universe)}
        if len(idx) != len(self.universe):
            raise ValueError("duplicate labels in universe")
        for i, j in self.edges:
            if i not in idx or j not in idx:
                raise ValueError(f"edge ({i},{j}) has endpoint outside the universe")
            if (i, j) != canon_pair(idx, i, j):
                raise ValueError(f"edge ({i},{j}) not in canonical order")
        object.__setattr__(self, "_index", idx)

    @classmethod
    def from_pairs(cls, universe: Sequence[str], pairs: Iterable) -> "EdgeSet":
        universe = tuple(universe)
        idx = {lab: k for k, lab in enumerate(universe)}
        edges = frozenset(canon_pair(idx, *tuple(p)) for p in pairs)
        return cls(universe, edges)

    def __contains__(self, pair) -> bool:
        i, j = tuple(pair)
        return canon_pair(self._index, i, j) in self.edges  # type: ignore[attr-defined]

    def __len__(self) -> int:
        return len(self.edges)


@dataclass(frozen=True)
class Partition:
    """Disjoint nonempty label sets covering the universe."""

    universe: tuple[str, ...]
    parts: tuple[frozenset[str], ...]

    def __post_init__(self):
        idx = {lab: k for k, lab in enumerate(self.universe)}
        seen: set[str] = set()
        for part in self.parts:
            if not part:
                raise ValueError("empty part")
            for lab in part:
                if lab not in idx:
                    raise ValueError(f"label {lab!r} outside the universe")
                if lab in seen:
                    raise ValueError(f"label {lab!r} in two parts")
                seen.add(lab)
        if len(seen) != len(self.universe):
            raise ValueError("parts do not cover the universe")
        ordered = tuple(sorted(self.parts, key=lambda p: min(idx[x] for x in p)))
        object.__setattr__(self, "parts", ordered)
        object.__setattr__(self, "_index", idx)

    @classmethod
    def from_parts(cls, universe: Sequence[str], parts: Iterable[Iterable[str]]) -> "Partition":
        return cls(tuple(universe), tuple(frozenset(p) for p in parts))

    @classmethod
    def singletons(cls, universe: Sequence[str]) -> "Partition":
        return cls(tuple(universe), tuple(frozenset([x]) for x in universe))

    def part_of(self, label: str) -> frozenset[str]:
        for part in self.parts:
            if label in part:
                return part
        raise KeyError(label)

    def refines(self, other: "Partition") -> bool:
        """True if every part of self is contained in some part of other."""
        if self.universe != other.universe:
            raise UniverseMismatch("partitions over different universes")
        owner = {lab: k for k, part in enumerate(other.parts) for lab in part}
        return all(len({owner[lab] for lab in part}) == 1 for part in self.parts)

    def same_part(self, i: str, j: str) -> bool:
        return any(i in part and j in part for part in self.parts)


@dataclass(frozen=True)
class HierarchySequence:
    """Partitions P^(1..l) where each level refines the next."""

    levels: tuple[Partition, ...]

    def __post_init__(self):
        if not self.levels:
            raise ValueError("need at least one level")
        for below, above in zip(self.levels, self.levels[1:]):
            if not below.refines(above):
                raise ValueError("levels are not hierarchical")

    @property
    def universe(self) -> tuple[str, ...]:
        return self.levels[0].universe

    def __len__(self) -> int:
        return len(self.levels)


def iter_partitions(items: Sequence[str]) -> Iterator[tuple[frozenset[str], ...]]:
    """All set partitions of items, in restricted-growth-string order.

    Parts come out ordered by first occurrence, which is the canonical
    partition order used for deterministic tie-breaking.
    """
    n = len(items)
    if n == 0:
        yield ()
        return
    a = [0] * n
    while True:
        nparts = max(a) + 1
        parts: list[list[str]] = [[] for _ in range(nparts)]
        for k, lab in enumerate(items):
            parts[a[k]].append(lab)
        yield tuple(frozenset(p) for p in parts)
        k = n - 1
        while k > 0:
            if a[k] <= max(a[:k]):
                a[k] += 1
                for m in range(k + 1, n):
                    a[m] = 0
                break
            a[k] = 0
            k -= 1
        else:
            return


# ---------------------------------------------------------------------------
# Edge-set algebra
# ---------------------------------------------------------------------------

def clique_edges(p: Partition) -> EdgeSet:
    """Union of all within-part pairs of a partition."""
    idx = {lab: k for k, lab in enumerate(p.universe)}
    edges = set()
    for part in p.parts:
        ordered = sorted(part, key=idx.__getitem__)
        edges.update(all_pairs(ordered))
    return EdgeSet(p.universe, frozenset(edges))


def sym_diff_size(a: EdgeSet, b: EdgeSet) -> int:
    """|A symmetric-difference B| for edge sets over the same universe."""
    if a.universe != b.universe:
        raise UniverseMismatch("edge sets over different universes")
    return len(a.edges ^ b.edges)


# ---------------------------------------------------------------------------
# Ultrametric trees
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UltraNode:
    height: float
    children: tuple["UltraNode", ...] = ()
    label: str | None = None

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass(frozen=True)
class UltrametricTree:
    """Rooted tree; leaves are labels at height 0, dist(i,j) = 2 * height(lca)."""

    labels: tuple[str, ...]
    root: UltraNode

    def __post_init__(self):
        leaves = tuple(self._iter_leaves(self.root))
        if sorted(leaves) != sorted(self.labels):
            raise ValueError("tree leaves do not match the label set")
        self._check_heights(self.root)
        object.__setattr__(self, "_dist", None)

    @staticmethod
    def _iter_leaves(node: UltraNode) -> Iterator[str]:
        if node.is_leaf:
            if node.label is None:
                raise ValueError("leaf without a label")
            yield node.label
        else:
            for child in node.children:
                yield from UltrametricTree._iter_leaves(child)

    @staticmethod
    def _check_heights(node: UltraNode) -> None:
        if node.is_leaf:
            if node.height != 0.0:
                raise ValueError("leaves must sit at height 0")
            return
        if node.height <= 0.0:
            raise ValueError("internal node height must be positive")
        for child in node.children:
            if child.height >= node.height:
                raise ValueError("heights must strictly increase child to parent")
            UltrametricTree._check_heights(child)

    @classmethod
    def from_map(cls, labels: Sequence[str], mapping: Mapping, *,
                 strict: bool = True, tol: float = DEFAULT_TOL) -> "UltrametricTree":
        """Build the canonical tree realizing an ultrametric pair map.

        Single-linkage merge over ascending distance values; with strict=True
        the realized distances are verified against the input within tol.
        """
        labels = tuple(labels)
        idx = {lab: k for k, lab in enumerate(labels)}
        if len(labels) == 1:
            return cls(labels, UltraNode(0.0, (), labels[0]))
        values = sorted({lookup_pair(mapping, i, j) for i, j in all_pairs(labels)})
        merged: list[float] = []
        for v in values:
            if not merged or v - merged[-1] > VALUE_MERGE_TOL:
                merged.append(v)
        parent = list(range(len(labels)))

        def find(x: int) -> int:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        node_of: dict[int, UltraNode] = {
            k: UltraNode(0.0, (), lab) for k, lab in enumerate(labels)
        }
        min_leaf: dict[int, int] = {k: k for k in range(len(labels))}
        for v in merged:
            if v <= 0:
                raise ValueError("ultrametric distances must be positive")
            # adjacency among current roots induced by pairs at value <= v
            root_adj: dict[int, set[int]] = {}
            for i, j in all_pairs(labels):
                if lookup_pair(mapping, i, j) <= v + VALUE_MERGE_TOL:
                    a, b = find(idx[i]), find(idx[j])
                    if a != b:
                        root_adj.setdefault(a, set()).add(b)
                        root_adj.setdefault(b, set()).add(a)
            visited: set[int] = set()
            for start in sorted(root_adj, key=min_leaf.__getitem__):
                if start in visited:
                    continue
                comp = {start}
                stack = [start]
                while stack:
                    cur = stack.pop()
                    for nxt in root_adj.get(cur, ()):
                        if nxt not in comp:
                            comp.add(nxt)
                            stack.append(nxt)
                visited |= comp
                roots = sorted(comp, key=min_leaf.__getitem__)
                child_nodes = tuple(node_of[r] for r in roots)
                new_node = UltraNode(v / 2.0, child_nodes)
                keep = roots[0]
                for r in roots[1:]:
                    parent[r] = keep
                node_of[keep] = new_node
                min_leaf[keep] = min(min_leaf[r] for r in roots)
        roots = sorted({find(k) for k in range(len(labels))})
        if len(roots) != 1:
            raise ValueError("pair map does not connect all labels")
        tree = cls(labels, node_of[roots[0]])
        if strict:
            realized = tree.distance_map()
            for i, j in all_pairs(labels):
                if abs(realized[(i, j)] - lookup_pair(mapping, i, j)) > tol:
                    raise ValueError(
                        f"map is not an ultrametric: pair ({i},{j}) realized "
                        f"{realized[(i, j)]} vs {lookup_pair(mapping, i, j)}")
        return tree

    def leaves(self) -> tuple[str, ...]:
        return tuple(self._iter_leaves(self.root))

    def distance_map(self) -> dict[Pair, float]:
        cached = self._dist  # type: ignore[attr-defined]
        if cached is None:
            idx = {lab: k for k, lab in enumerate(self.labels)}
            cached = {}
            self._fill_distances(self.root, idx, cached)
            object.__setattr__(self, "_dist", cached)
        return cached

    @staticmethod
    def _fill_distances(node: UltraNode, idx, out: dict[Pair, float]) -> list[str]:
        if node.is_leaf:
            return [node.label]  # type: ignore[list-item]
        groups = [UltrametricTree._fill_distances(c, idx, out) for c in node.children]
        for a in range(len(groups)):
            for b in range(a + 1, len(groups)):
                for i in groups[a]:
                    for j in groups[b]:
                        out[canon_pair(idx, i, j)] = 2.0 * node.height
        merged = [lab for g in groups for lab in g]
        return merged

    def distance(self, i: str, j: str) -> float:
        idx = {lab: k for k, lab in enumerate(self.labels)}
        return self.distance_map()[canon_pair(idx, i, j)]

    def top_distance(self) -> float:
        return 2.0 * self.root.height


# ---------------------------------------------------------------------------
# Weighted trees
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WeightedTree:
    """Undirected tree spanning the labels; dist = path weight sum.

    Edge weights >= 0 are accepted; a weight of 0 flags a pseudometric.
    """

    labels: tuple[str, ...]
    edges: tuple[tuple[str, str, float], ...]
    root: str | None = None

    def __post_init__(self):
        nodes = set(self.labels)
        for u, v, w in self.edges:
            if u == v:
                raise ValueError("self-loop")
            if w < 0:
                raise ValueError("negative edge weight")
            nodes.add(u)
            nodes.add(v)
        if len(self.edges) != len(nodes) - 1 and len(nodes) > 1:
            raise ValueError("edge count does not match a tree")
        adj: dict[str, list[tuple[str, float]]] = {node: [] for node in nodes}
        for u, v, w in self.edges:
            adj[u].append((v, w))
            adj[v].append((u, w))
        # connectivity check from any node
        if nodes:
            start = next(iter(sorted(nodes)))
            seen = {start}
            stack = [start]
            while stack:
                cur = stack.pop()
                for nxt, _ in adj[cur]:
                    if nxt not in seen:
                        seen.add(nxt)
                        stack.append(nxt)
            if seen != nodes:
                raise ValueError("tree is not connected")
        object.__setattr__(self, "_adj", adj)
        object.__setattr__(self, "_dist", None)

    @property
    def nodes(self) -> tuple[str, ...]:
        return tuple(sorted(self._adj))  # type: ignore[attr-defined]

    def has_zero_weight(self) -> bool:
        return any(w == 0.0 for _, _, w in self.edges)

    def adjacency(self) -> Mapping[str, list[tuple[str, float]]]:
        return self._adj  # type: ignore[attr-defined]

    def distance_map(self) -> dict[Pair, float]:
        """Pairwise label distances, computed by one traversal per label."""
        cached = self._dist  # type: ignore[attr-defined]
        if cached is None:
            idx = {lab: k for k, lab in enumerate(self.labels)}
            adj = self._adj  # type: ignore[attr-defined]
            cached = {}
            label_set = set(self.labels)
            for src in self.labels:
                dist = {src: 0.0}
                stack = [src]
                while stack:
                    cur = stack.pop()
                    for nxt, w in adj[cur]:
                        if nxt not in dist:
                            dist[nxt] = dist[cur] + w
                            stack.append(nxt)
                for other in label_set:
                    if other != src and idx[other] > idx[src]:
                        cached[(src, other)] = dist[other]
            object.__setattr__(self, "_dist", cached)
        return cached

    def distance(self, i: str, j: str) -> float:
        idx = {lab: k for k, lab in enumerate(self.labels)}
        return self.distance_map()[canon_pair(idx, i, j)]


# ---------------------------------------------------------------------------
# Fit results
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FittedTree:
    """Result of a fitting run: the tree plus its error and LP lower bound."""

    kind: str  # "ultrametric" or "tree"
    tree: UltrametricTree | WeightedTree
    l1_error: float
    lp_lower_bound: float | None
    num_levels: int
    details: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Norm evaluation and the ultrametric predicate
# ---------------------------------------------------------------------------

def lp_norm_error(tree, d: DistanceMatrix, p: float) -> float:
    """(sum |dist_T(i,j) - D(i,j)|^p)^(1/p); max when p is infinite."""
    if p != math.inf and p < 1:
        raise ValueError("p must be >= 1 or inf")
    if isinstance(tree, (UltrametricTree, WeightedTree)):
        if sorted(tree.labels) != sorted(d.labels):
            raise UniverseMismatch("tree labels do not match the distance matrix")
        realized = tree.distance_map()
    elif isinstance(tree, Mapping):
        realized = tree
    else:
        raise TypeError(f"cannot evaluate distances of {type(tree)!r}")
    diffs = [abs(lookup_pair(realized, i, j) - v) for i, j, v in d.pairs()]
    if p == math.inf:
        return max(diffs) if diffs else 0.0
    if p == 1:
        return sum(diffs)
    return sum(x ** p for x in diffs) ** (1.0 / p)


def is_ultrametric(mapping: Mapping, tol: float = DEFAULT_TOL) -> bool:
    """True iff U(i,j) <= max(U(i,k), U(k,j)) + tol for all triples."""
    labels = sorted({x for key in mapping for x in tuple(key)})
    for i, j, k in itertools.combinations(labels, 3):
        dij = lookup_pair(mapping, i, j)
        dik = lookup_pair(mapping, i, k)
        djk = lookup_pair(mapping, j, k)
        top, mid, _ = sorted((dij, dik, djk), reverse=True)
        if top > mid + tol:
            return False
    return True
