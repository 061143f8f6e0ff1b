import pytest

from treefit.core import DistanceMatrix, EdgeSet, all_pairs, clique_edges
from treefit.hcc import components_partition, fit_hcc, triangle_switch_holds
from treefit.lp import HccInstance, hierarchy_cost
from treefit.oracle import exact_corr_cluster, exact_hcc
from treefit.ultrametric import hcc_instance_from_distances
from conftest import random_hierarchy


def es(universe, pairs):
    return EdgeSet.from_pairs(universe, pairs)


def random_instance(rng, n, n_levels):
    universe = tuple(f"s{k}" for k in range(n))
    pool = list(all_pairs(universe))
    sets = tuple(es(universe, [p for p in pool if rng.random() < rng.uniform(0.25, 0.75)])
                 for _ in range(n_levels))
    deltas = tuple(rng.uniform(0.4, 2.0) for _ in range(n_levels))
    return HccInstance(universe, deltas, sets)


class TestComponents:
    def test_components(self):
        e = es("abcd", [("a", "b"), ("b", "c")])
        p = components_partition(e)
        assert sorted(sorted(x) for x in p.parts) == [["a", "b", "c"], ["d"]]


class TestFitHcc:
    def test_nested_cliques_reproduced(self, rng):
        labels = tuple(f"s{k}" for k in range(7))
        chain = random_hierarchy(rng, labels, 3)
        inst = HccInstance.from_partitions(labels, (1.0, 0.5, 2.0), chain)
        res = fit_hcc(inst)
        assert res.cost == 0.0
        assert res.lp_lower_bound == 0.0
        assert res.hierarchy.levels == tuple(chain)

    def test_single_level_at_least_exact(self, rng):
        for _ in range(8):
            inst = random_instance(rng, rng.randint(4, 8), 1)
            res = fit_hcc(inst)
            _, opt = exact_corr_cluster(inst.labels, inst.edge_sets[0])
            assert res.cost >= inst.deltas[0] * opt - 1e-9

    def test_distance_derived_instance(self):
        d = DistanceMatrix.from_pairs(
            ("1", "2", "3"), {("1", "2"): 1.0, ("1", "3"): 2.0, ("2", "3"): 2.0})
        inst, _ = hcc_instance_from_distances(d)
        res = fit_hcc(inst)
        assert res.cost == 0.0
        assert sorted(sorted(p) for p in res.hierarchy.levels[0].parts) == \
            [["1", "2"], ["3"]]

    def test_sandwich_lp_exact_algorithm(self, rng):
        for _ in range(6):
            inst = random_instance(rng, rng.randint(4, 6), rng.randint(1, 2))
            res = fit_hcc(inst)
            _, opt = exact_hcc(inst)
            assert res.lp_lower_bound <= opt + 1e-6
            assert opt <= res.cost + 1e-9

    def test_triangle_switch_always_holds(self, rng):
        for _ in range(10):
            inst = random_instance(rng, rng.randint(4, 7), rng.randint(1, 3))
            res = fit_hcc(inst)
            assert triangle_switch_holds(res)

    def test_cost_matches_hierarchy_cost(self, rng):
        inst = random_instance(rng, 6, 2)
        res = fit_hcc(inst)
        assert res.cost == pytest.approx(hierarchy_cost(inst, res.hierarchy))

    def test_level_costs_recorded(self, rng):
        inst = random_instance(rng, 5, 2)
        res = fit_hcc(inst)
        for t, q in enumerate(res.partitions):
            from treefit.core import sym_diff_size

            assert res.level_costs[t] == sym_diff_size(
                inst.edge_sets[t], clique_edges(q))

    def test_integrality_gap_on_small_corpus(self, rng):
        # achieved cost stays within a modest factor of the instance's own
        # LP optimum; the acceptance suite freezes the corpus-wide gate
        worst = 0.0
        for _ in range(10):
            inst = random_instance(rng, rng.randint(4, 6), rng.randint(1, 2))
            res = fit_hcc(inst)
            if res.lp_lower_bound > 1e-9:
                worst = max(worst, res.cost / res.lp_lower_bound)
            else:
                assert res.cost <= 1e-9
        assert worst <= 10.0
