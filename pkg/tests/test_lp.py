import random

import numpy as np
import pytest

from treefit.core import EdgeSet, HierarchySequence, Partition, all_pairs
from treefit.lp import (
    HccInstance,
    SolverError,
    build_lp,
    cost_edges,
    hierarchy_cost,
    integral_solution,
    lp_cost,
    solve_lp,
)
from treefit.oracle import exact_hcc
from treefit.simplex import SimplexStall, solve_dense
from conftest import feasible_lp_maps, random_partition

LABELS3 = ("a", "b", "c")


def es(universe, pairs):
    return EdgeSet.from_pairs(universe, pairs)


def random_instance(rng, n, n_levels, universe=None) -> HccInstance:
    universe = universe or tuple(f"s{k}" for k in range(n))
    pool = list(all_pairs(universe))
    sets = []
    for _ in range(n_levels):
        chosen = [p for p in pool if rng.random() < rng.uniform(0.2, 0.8)]
        sets.append(es(universe, chosen))
    deltas = tuple(rng.uniform(0.3, 2.5) for _ in range(n_levels))
    return HccInstance(universe, deltas, tuple(sets))


class TestBuildLp:
    def test_counts_single_level(self):
        inst = HccInstance(LABELS3, (1.0,), (es(LABELS3, [("a", "b"), ("b", "c")]),))
        lp = build_lp(inst)
        assert lp.n_vars == 3
        assert lp.row_kinds.count("triangle") == 3
        assert lp.row_kinds.count("monotone") == 0

    def test_counts_two_levels(self):
        inst = HccInstance(LABELS3, (1.0, 1.0),
                           (es(LABELS3, []), es(LABELS3, [("a", "b")])))
        lp = build_lp(inst)
        assert lp.n_vars == 6
        assert lp.row_kinds.count("triangle") == 6
        assert lp.row_kinds.count("monotone") == 3

    def test_two_point_objective(self):
        inst = HccInstance(("a", "b"), (2.0,), (es("ab", [("a", "b")]),))
        lp = build_lp(inst)
        assert lp.const == 0.0
        assert list(lp.c) == [2.0]
        assert solve_lp(lp).objective == pytest.approx(0.0)


class TestSolveLp:
    def test_path_optimum(self):
        # brute force over all integral hierarchies on 3 labels gives 1 and
        # the relaxation matches it (an integral vertex is optimal)
        inst = HccInstance(LABELS3, (1.0,), (es(LABELS3, [("a", "b"), ("b", "c")]),))
        sol = solve_lp(build_lp(inst))
        assert sol.objective == pytest.approx(1.0, abs=1e-9)

    def test_conflicting_levels_optimum(self):
        # edges at the bottom level, none at the top: monotonicity makes the
        # single pair pay at one of the two levels, so the optimum is 1
        inst = HccInstance(("a", "b"), (1.0, 1.0),
                           (es("ab", [("a", "b")]), es("ab", [])))
        sol = solve_lp(build_lp(inst))
        assert sol.objective == pytest.approx(1.0, abs=1e-9)

    def test_nested_cliques_zero_and_integral(self):
        q1 = Partition.from_parts("abcd", [{"a", "b"}, {"c"}, {"d"}])
        q2 = Partition.from_parts("abcd", [{"a", "b", "c"}, {"d"}])
        inst = HccInstance.from_partitions("abcd", (1.0, 2.0), [q1, q2])
        sol = solve_lp(build_lp(inst))
        assert sol.objective == pytest.approx(0.0, abs=1e-12)
        assert np.all((sol.x == 0.0) | (sol.x == 1.0))

    def test_feasibility_post_solve(self, rng):
        for _ in range(15):
            inst = random_instance(rng, rng.randint(3, 6), rng.randint(1, 3))
            sol = solve_lp(build_lp(inst))
            worst = sol.max_violation()
            assert max(worst.values()) <= 1e-7

    def test_lower_bounds_every_integral_hierarchy(self, rng):
        for _ in range(8):
            inst = random_instance(rng, rng.randint(3, 5), rng.randint(1, 3))
            sol = solve_lp(build_lp(inst))
            _, best = exact_hcc(inst)
            assert sol.objective <= best + 1e-6

    def test_backends_agree(self, rng):
        for _ in range(6):
            inst = random_instance(rng, rng.randint(3, 6), rng.randint(1, 2))
            lp = build_lp(inst)
            a = solve_lp(lp, backend="simplex").objective
            b = solve_lp(lp, backend="highs").objective
            assert a == pytest.approx(b, abs=1e-6)

    def test_objective_scaling(self, rng):
        inst = random_instance(rng, 5, 2)
        factor = 7.5
        scaled = HccInstance(inst.labels,
                             tuple(d * factor for d in inst.deltas),
                             inst.edge_sets)
        sol = solve_lp(build_lp(inst))
        # same point costs exactly factor times more on the scaled instance
        direct = sum(
            scaled.deltas[t] * cost_edges(scaled.edge_sets[t], sol.level_map(t))
            for t in range(scaled.n_levels))
        assert direct == pytest.approx(factor * sol.objective, rel=1e-9)
        resolved = solve_lp(build_lp(scaled))
        assert resolved.objective == pytest.approx(factor * sol.objective, rel=1e-6)

    def test_iteration_cap_carries_best_point(self):
        inst = HccInstance(LABELS3, (1.0,), (es(LABELS3, [("a", "b"), ("b", "c")]),))
        lp = build_lp(inst)
        with pytest.raises(SolverError) as err:
            solve_lp(lp, iteration_cap=0)
        assert err.value.best is not None
        assert max(err.value.best.max_violation().values()) <= 1e-7

    def test_xii_is_zero_by_convention(self):
        inst = HccInstance(LABELS3, (1.0,), (es(LABELS3, []),))
        sol = solve_lp(build_lp(inst))
        assert sol.value(0, "a", "a") == 0.0


class TestLpCost:
    def test_integral_match_is_free(self):
        q = Partition.from_parts("abcd", [{"a", "b"}, {"c", "d"}])
        inst = HccInstance.from_partitions("abcd", (3.0,), [q])
        sol = integral_solution(inst, HierarchySequence((q,)))
        assert lp_cost(inst, sol).total == 0.0

    def test_half_everywhere(self):
        labels = tuple("abcd")
        inst = HccInstance(labels, (1.0,), (es(labels, [("a", "b")]),))
        sol = integral_solution(inst, HierarchySequence((Partition.singletons(labels),)))
        sol.x[:] = 0.5
        assert lp_cost(inst, sol).total == pytest.approx(0.5 * 6)

    def test_species_costs_double_count(self, rng):
        inst = random_instance(rng, 5, 2)
        sol = solve_lp(build_lp(inst))
        costs = lp_cost(inst, sol)
        for t in range(inst.n_levels):
            total_i = sum(costs.species(t, i) for i in inst.labels)
            assert total_i == pytest.approx(2.0 * costs.per_level[t], rel=1e-9)

    def test_hierarchy_cost_equals_integral_point_objective(self, rng):
        labels = tuple(f"s{k}" for k in range(5))
        inst = random_instance(rng, 5, 2, universe=labels)
        chain = [random_partition(rng, labels)]
        parts = list(chain[0].parts)
        merged = [set(parts[0])]
        for p in parts[1:]:
            merged[0] |= p
        chain.append(Partition.from_parts(labels, merged))
        h = HierarchySequence(tuple(chain))
        assert hierarchy_cost(inst, h) == pytest.approx(
            integral_solution(inst, h).objective, rel=1e-12)


class TestCostEdges:
    def test_exact_match_zero(self):
        universe = tuple("abc")
        e = es(universe, [("a", "b")])
        x = {("a", "b"): 0.0, ("a", "c"): 1.0, ("b", "c"): 1.0}
        assert cost_edges(e, x) == 0.0

    def test_empty_edges_all_ones(self):
        universe = tuple("abc")
        x = dict.fromkeys(all_pairs(universe), 1.0)
        assert cost_edges(es(universe, []), x) == 0.0

    def test_cost_difference_bounded_by_sym_diff(self, rng):
        # |cost(E1,x) - cost(E2,x)| <= |E1 sym-diff E2| for fractional x,
        # which gives the delta-weighted comparison for any level weight
        universe = tuple(f"s{k}" for k in range(6))
        pool = list(all_pairs(universe))
        for _ in range(50):
            e1 = es(universe, [p for p in pool if rng.random() < 0.5])
            e2 = es(universe, [p for p in pool if rng.random() < 0.5])
            maps = feasible_lp_maps(rng, universe, 1)[0]
            c1, c2 = cost_edges(e1, maps), cost_edges(e2, maps)
            diff = len(e1.edges ^ e2.edges)
            assert abs(c1 - c2) <= diff + 1e-9


class TestSimplexDirect:
    def test_tiny_lp(self):
        # min -x - y st x + y <= 1.5, x,y in [0,1] -> -1.5
        res = solve_dense(np.array([-1.0, -1.0]),
                          np.array([[1.0, 1.0]]), np.array([1.5]))
        assert res.objective == pytest.approx(-1.5)

    def test_rejects_negative_rhs(self):
        with pytest.raises(ValueError):
            solve_dense(np.array([1.0]), np.array([[1.0]]), np.array([-1.0]))

    def test_stall_exception_carries_point(self):
        with pytest.raises(SimplexStall) as err:
            solve_dense(np.array([-1.0, -1.0]),
                        np.array([[1.0, 1.0]]), np.array([1.5]),
                        iteration_cap=0)
        assert err.value.x.shape == (2,)


class TestDump:
    def test_dump_roundtrip_values(self):
        inst = HccInstance(LABELS3, (1.0,), (es(LABELS3, [("a", "b"), ("b", "c")]),))
        lp = build_lp(inst)
        sol = solve_lp(lp)
        text = lp.dump_text(sol.x.reshape(-1), sol.objective)
        assert "min:" in text and "subject_to[triangle]" in text
        assert f"objective_value: {sol.objective!r}" in text
