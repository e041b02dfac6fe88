import itertools

import numpy as np
import pytest

from equiroute.master import (
    ColumnPool,
    RmpSolver,
    build_rmp,
    dump_rmp,
    solve_restricted_integer_master,
    solve_rmp,
)
from equiroute.model import ModelError, RouteDelivery, make_route_delivery, solution_from_routes
from equiroute.pricing import PricingContext, reduced_cost

from conftest import euclid_instance, flat_instance


def singleton_columns(inst, share=None):
    # Proportional shares keep the summed deliveries within C.
    if share is None:
        share = inst.C / inst.total_demand
    cols = []
    for v in inst.shelters():
        q = min(share * inst.demands[v - 1], inst.Q)
        cols.append(make_route_delivery(inst, [v], [q]))
    return cols


class TestBuild:
    def test_dimensions_for_two_shelters(self):
        inst = flat_instance([1, 1], Q=2, C=1.5, m=2)
        cols = singleton_columns(inst, share=0.5)
        lp = build_rmp(inst, cols, epsilon=10.0, gamma=1e-4, theta=5.0)
        # 4 pairwise rows + 1 time + 2 cover + 1 fleet + 1 supply
        assert lp.A.shape[0] == 9
        # 8 tau + 2 artificial slots (bounded to zero) + 2 columns
        assert lp.A.shape[1] == 12
        assert np.all(lp.hi[8:10] == 0.0)

    def test_missing_cover_is_infeasible(self):
        inst = flat_instance([1, 1, 1], Q=2, C=2, m=3)
        col = make_route_delivery(inst, [1], [0.5])
        res, duals, _ = solve_rmp(inst, [col], epsilon=10.0, gamma=1e-4, theta=5.0)
        assert res.status == "infeasible"
        assert duals is None

    def test_gamma_zero_reduces_to_pure_objective(self):
        inst = flat_instance([1, 1], Q=2, C=1.5, m=2)
        cols = singleton_columns(inst, share=0.5)
        solver = RmpSolver(inst, epsilon=10.0, gamma=0.0, theta=5.0, artificials=False)
        for rd in cols:
            solver.add_column(rd)
        assert solver.offset == pytest.approx(inst.total_demand)
        res, _ = solver.solve()
        value = res.objective + solver.offset
        sol = solution_from_routes(inst, cols)
        assert value == pytest.approx(sol.f_iaaf, abs=1e-8)


class TestSolve:
    def test_integral_optimum_matches_evaluation(self, rng):
        inst = euclid_instance(rng, 3, m=3)
        cols = singleton_columns(inst)
        res, duals, bound = solve_rmp(inst, cols, epsilon=inst.epsilon, gamma=1e-4, theta=100.0)
        assert res.status == "optimal"
        sol = solution_from_routes(inst, cols)
        assert bound <= sol.augmented_objective(inst.epsilon, 1e-4, 100.0) + 1e-7

    def test_dual_signs(self, rng):
        inst = euclid_instance(rng, 4, m=4)
        cols = singleton_columns(inst)
        res, duals, _ = solve_rmp(inst, cols, epsilon=inst.epsilon, gamma=1e-4, theta=100.0)
        assert res.status == "optimal"
        assert duals.time <= 1e-9
        assert duals.fleet <= 1e-9
        assert duals.supply <= 1e-9

    def test_pool_reduced_costs_nonnegative_at_optimum(self, rng):
        # Simplex optimality: every column already in the pool prices out.
        inst = euclid_instance(rng, 4, m=4)
        pool = ColumnPool(inst)
        for rd in singleton_columns(inst):
            pool.add(rd)
        for v in inst.shelters():
            q = 0.5 * min(inst.demands[v - 1], inst.Q)
            pool.add(make_route_delivery(inst, [v], [q]))
        res, duals, _ = solve_rmp(inst, pool, epsilon=inst.epsilon, gamma=1e-4, theta=100.0)
        assert res.status == "optimal"
        ctx = PricingContext(inst, duals, gamma_over_theta=1e-4 / 100.0)
        for rd in pool:
            assert reduced_cost(ctx, rd) >= -1e-7


class TestColumnPool:
    def test_dedup_and_feasibility(self, rng):
        inst = euclid_instance(rng, 3)
        pool = ColumnPool(inst)
        rd = make_route_delivery(inst, [1], [1.0])
        assert pool.add(rd)
        assert not pool.add(rd)
        with pytest.raises(ModelError):
            pool.add(RouteDelivery((1,), (inst.Q * 2,), 1.0))

    def test_distinct_durations_are_kept(self, rng):
        inst = euclid_instance(rng, 3)
        a = make_route_delivery(inst, [1, 2], [1.0, 1.0])
        b = make_route_delivery(inst, [2, 1], [1.0, 1.0])
        pool = ColumnPool(inst)
        pool.add(a)
        added = pool.add(b)
        if abs(a.duration - b.duration) > 1e-9:
            assert added

    def test_filtered_indices(self, rng):
        from equiroute.branching import BranchingConstraints, edge

        inst = euclid_instance(rng, 3)
        pool = ColumnPool(inst)
        pool.add(make_route_delivery(inst, [1, 2], [1.0, 1.0]))
        pool.add(make_route_delivery(inst, [3], [1.0]))
        cons = BranchingConstraints().forbid(edge(1, 2))
        assert pool.filtered_indices(cons) == [1]


class TestIntegerMaster:
    def test_single_cover_returned(self, rng):
        inst = euclid_instance(rng, 3, m=3)
        cols = singleton_columns(inst)
        sol = solve_restricted_integer_master(inst, cols, inst.epsilon, 1e-4, 100.0)
        assert sol is not None
        assert {r.nodes for r in sol.routes} == {(1,), (2,), (3,)}

    def test_matches_exhaustive_subset_search(self, rng):
        for trial in range(10):
            n = 4
            inst = euclid_instance(rng, n, m=2)
            pool = ColumnPool(inst)
            # A spread of feasible columns over subsets.
            for size in (1, 2, 3):
                for subset in itertools.combinations(range(1, n + 1), size):
                    dur = inst.route_duration(subset)
                    if dur > inst.psi:
                        continue
                    d_set = sum(inst.demands[v - 1] for v in subset)
                    share = min(inst.Q, d_set) / d_set
                    q = [share * inst.demands[v - 1] for v in subset]
                    try:
                        pool.add(make_route_delivery(inst, subset, q))
                    except ModelError:
                        pass
            cols = pool.columns[:12]
            got = solve_restricted_integer_master(inst, cols, inst.epsilon, 1e-4, 100.0)
            # Exhaustive reference over all column subsets.
            best = None
            for r in range(1, inst.m + 1):
                for combo in itertools.combinations(cols, r):
                    nodes = [v for rd in combo for v in rd.nodes]
                    if len(nodes) != n or len(set(nodes)) != n:
                        continue
                    total_q = sum(rd.delivery_total for rd in combo)
                    total_t = sum(rd.duration for rd in combo)
                    if total_q > inst.C + 1e-9 or total_t > inst.epsilon + 1e-9:
                        continue
                    sol = solution_from_routes(inst, combo)
                    value = sol.augmented_objective(inst.epsilon, 1e-4, 100.0)
                    if best is None or value < best - 1e-12:
                        best = value
            if best is None:
                assert got is None
            else:
                assert got is not None
                assert got.augmented_objective(inst.epsilon, 1e-4, 100.0) == pytest.approx(
                    best, abs=1e-6
                )

    def test_infeasible_pool_returns_none(self, rng):
        inst = euclid_instance(rng, 3, m=1)
        cols = singleton_columns(inst)  # m=1 cannot take three routes
        assert solve_restricted_integer_master(inst, cols, inst.epsilon, 1e-4, 100.0) is None


def test_dump_rmp(tmp_path, rng):
    inst = euclid_instance(rng, 2, m=2)
    cols = singleton_columns(inst)
    path = tmp_path / "rmp.lp"
    dump_rmp(inst, cols, inst.epsilon, 1e-4, 100.0, path)
    text = path.read_text()
    assert "Minimize" in text and "y0" in text and "tp_0_1" in text
