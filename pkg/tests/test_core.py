import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from treefit.core import (
    DistanceMatrix,
    EdgeSet,
    Partition,
    UltraNode,
    UltrametricTree,
    UniverseMismatch,
    WeightedTree,
    all_pairs,
    clique_edges,
    is_ultrametric,
    iter_partitions,
    lp_norm_error,
    sym_diff_size,
)
from conftest import random_ultrametric_map


def edge_set(universe, pairs):
    return EdgeSet.from_pairs(universe, pairs)


class TestCliqueEdges:
    def test_pair_and_singleton(self):
        p = Partition.from_parts("abc", [{"a", "b"}, {"c"}])
        assert clique_edges(p).edges == frozenset({("a", "b")})

    def test_all_singletons(self):
        p = Partition.singletons("abcd")
        assert clique_edges(p).edges == frozenset()

    def test_triangle(self):
        p = Partition.from_parts("abc", [{"a", "b", "c"}])
        assert clique_edges(p).edges == frozenset(
            {("a", "b"), ("a", "c"), ("b", "c")})

    def test_edge_count_formula(self, rng):
        labels = tuple(f"x{k}" for k in range(9))
        for _ in range(25):
            buckets = {}
            for lab in labels:
                buckets.setdefault(rng.randrange(4), set()).add(lab)
            p = Partition.from_parts(labels, buckets.values())
            expected = sum(len(part) * (len(part) - 1) // 2 for part in p.parts)
            assert len(clique_edges(p)) == expected


class TestSymDiff:
    def test_identical(self):
        a = edge_set("abc", [("a", "b")])
        assert sym_diff_size(a, a) == 0

    def test_single_edge_vs_empty(self):
        assert sym_diff_size(edge_set("abc", [("a", "b")]),
                             edge_set("abc", [])) == 1

    def test_two_vs_two(self):
        a = edge_set("abc", [("a", "b"), ("b", "c")])
        b = edge_set("abc", [("b", "c"), ("a", "c")])
        assert sym_diff_size(a, b) == 2

    def test_universe_mismatch_rejected(self):
        with pytest.raises(UniverseMismatch):
            sym_diff_size(edge_set("abc", []), edge_set("abd", []))

    @given(st.data())
    @settings(max_examples=60, deadline=None)
    def test_triangle_inequality(self, data):
        universe = tuple("abcde")
        pool = list(all_pairs(universe))
        pick = lambda: data.draw(st.sets(st.sampled_from(pool)))
        a, b, c = (edge_set(universe, pick()) for _ in range(3))
        assert sym_diff_size(a, c) <= sym_diff_size(a, b) + sym_diff_size(b, c)


class TestLpNormError:
    def setup_method(self):
        self.d = DistanceMatrix.from_pairs(
            ("1", "2", "3"), {("1", "2"): 1.0, ("1", "3"): 2.0, ("2", "3"): 3.0})
        self.u = UltrametricTree.from_map(
            ("1", "2", "3"), {("1", "2"): 1.0, ("1", "3"): 3.0, ("2", "3"): 3.0})

    def test_exact_fit_is_zero(self):
        exact = DistanceMatrix.from_pairs(
            ("1", "2", "3"), self.u.distance_map())
        assert lp_norm_error(self.u, exact, 1) == 0.0

    def test_l1(self):
        assert lp_norm_error(self.u, self.d, 1) == pytest.approx(1.0)

    def test_linf(self):
        assert lp_norm_error(self.u, self.d, math.inf) == pytest.approx(1.0)

    def test_label_mismatch_rejected(self):
        other = DistanceMatrix.from_pairs("xyz", {
            ("x", "y"): 1.0, ("x", "z"): 1.0, ("y", "z"): 1.0})
        with pytest.raises(UniverseMismatch):
            lp_norm_error(self.u, other, 1)

    def test_p_between_one_and_inf(self):
        assert lp_norm_error(self.u, self.d, 2) == pytest.approx(1.0)
        with pytest.raises(ValueError):
            lp_norm_error(self.u, self.d, 0.5)


class TestIsUltrametric:
    def test_equal_pair_max(self):
        assert is_ultrametric({("1", "2"): 1.0, ("1", "3"): 3.0, ("2", "3"): 3.0})

    def test_violating_triple(self):
        assert not is_ultrametric({("1", "2"): 1.0, ("1", "3"): 2.0, ("2", "3"): 3.0})

    def test_two_points_vacuous(self):
        assert is_ultrametric({("a", "b"): 5.0})

    def test_random_generated_maps(self, rng):
        for _ in range(30):
            m = random_ultrametric_map(rng, [f"s{k}" for k in range(6)])
            assert is_ultrametric(m)


class TestUltrametricTree:
    def test_from_map_realizes_input(self, rng):
        labels = tuple(f"s{k}" for k in range(8))
        for _ in range(20):
            m = random_ultrametric_map(rng, labels)
            tree = UltrametricTree.from_map(labels, m)
            realized = tree.distance_map()
            for pair, v in m.items():
                assert realized[pair] == pytest.approx(v, abs=1e-9)
            assert is_ultrametric(realized, tol=1e-9)

    def test_from_map_rejects_non_ultrametric(self):
        with pytest.raises(ValueError):
            UltrametricTree.from_map(
                ("1", "2", "3"),
                {("1", "2"): 1.0, ("1", "3"): 2.0, ("2", "3"): 3.0})

    def test_heights_strictly_increase(self, rng):
        labels = tuple(f"s{k}" for k in range(7))
        m = random_ultrametric_map(rng, labels)
        tree = UltrametricTree.from_map(labels, m)

        def walk(node):
            for child in node.children:
                if not child.is_leaf:
                    assert child.height < node.height
                walk(child)

        walk(tree.root)

    def test_children_sorted_by_first_leaf(self):
        m = {("a", "b"): 2.0, ("a", "c"): 2.0, ("b", "c"): 1.0}
        tree = UltrametricTree.from_map(("a", "b", "c"), m)
        first = tree.root.children[0]
        assert first.is_leaf and first.label == "a"

    def test_leaves_must_be_at_zero(self):
        with pytest.raises(ValueError):
            UltrametricTree(("a",), UltraNode(1.0, (), "a"))


class TestWeightedTree:
    def test_path_distances(self):
        t = WeightedTree(labels=("a", "b", "c"),
                         edges=(("a", "m", 1.0), ("b", "m", 2.0), ("c", "m", 4.0)))
        assert t.distance("a", "b") == pytest.approx(3.0)
        assert t.distance("a", "c") == pytest.approx(5.0)
        assert t.distance("b", "c") == pytest.approx(6.0)

    def test_rejects_cycles(self):
        with pytest.raises(ValueError):
            WeightedTree(labels=("a", "b"),
                         edges=(("a", "b", 1.0), ("b", "c", 1.0), ("c", "a", 1.0)))

    def test_rejects_disconnected(self):
        with pytest.raises(ValueError):
            WeightedTree(labels=("a", "b", "c", "d"),
                         edges=(("a", "b", 1.0), ("c", "d", 1.0), ("c", "d", 2.0)))

    def test_zero_weight_flagging(self):
        t = WeightedTree(labels=("a", "b"), edges=(("a", "b", 0.0),))
        assert t.has_zero_weight()


class TestPartitions:
    def test_iter_partitions_counts(self):
        # Bell numbers 1, 2, 5, 15, 52
        for n, bell in [(1, 1), (2, 2), (3, 5), (4, 15), (5, 52)]:
            labels = tuple(f"x{k}" for k in range(n))
            assert sum(1 for _ in iter_partitions(labels)) == bell

    def test_refinement(self):
        fine = Partition.from_parts("abcd", [{"a"}, {"b"}, {"c", "d"}])
        coarse = Partition.from_parts("abcd", [{"a", "b"}, {"c", "d"}])
        assert fine.refines(coarse)
        assert not coarse.refines(fine)

    def test_rejects_bad_partitions(self):
        with pytest.raises(ValueError):
            Partition.from_parts("abc", [{"a", "b"}])  # missing c
        with pytest.raises(ValueError):
            Partition.from_parts("abc", [{"a", "b"}, {"b", "c"}])  # overlap


class TestDistanceMatrix:
    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            DistanceMatrix.from_pairs("ab", {("a", "b"): 0.0})

    def test_rejects_missing_pair(self):
        with pytest.raises(ValueError):
            DistanceMatrix(("a", "b", "c"), {("a", "b"): 1.0})

    def test_distinct_values_merge_near_ties(self):
        d = DistanceMatrix.from_pairs("abc", {
            ("a", "b"): 1.0, ("a", "c"): 1.0 + 1e-13, ("b", "c"): 2.0})
        assert d.distinct_values() == (1.0, 2.0)
