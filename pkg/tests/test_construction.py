import itertools

import numpy as np
import pytest

from equiroute.branching import BranchingConstraints, edge
from equiroute.construction import (
    ConstructionError,
    FitnessBreakdown,
    TabuConfig,
    clarke_wright,
    improve_routes,
    route_fitness,
    tabu_search,
)
from equiroute.model import Instance, solution_from_routes, solution_violations

from conftest import euclid_instance, flat_instance


def sym_instance(coords, demands, m, Q, C, psi, epsilon):
    import math

    n = len(demands)
    travel = [[0.0] * (n + 1) for _ in range(n + 1)]
    for i in range(n + 1):
        for j in range(n + 1):
            if i != j:
                travel[i][j] = math.hypot(
                    coords[i][0] - coords[j][0], coords[i][1] - coords[j][1]
                )
    return Instance(
        demands=tuple(float(d) for d in demands),
        travel=tuple(tuple(row) for row in travel),
        m=m,
        Q=Q,
        C=C,
        psi=psi,
        epsilon=epsilon,
    )


class TestClarkeWright:
    def test_classic_saving_drives_merge(self):
        # Two shelters 5 from the depot, 2 apart: saving 8, must merge.
        inst = sym_instance(
            coords=[(0, 0), (5, 0), (5, 2)],
            demands=[4, 4],
            m=2,
            Q=10,
            C=6,
            psi=100,
            epsilon=200,
        )
        sol = clarke_wright(inst)
        assert len(sol.routes) == 1
        assert set(sol.routes[0].nodes) == {1, 2}

    def test_tight_psi_keeps_singletons(self):
        inst = sym_instance(
            coords=[(0, 0), (5, 0), (0, 5), (-5, 0)],
            demands=[4, 4, 4],
            m=3,
            Q=10,
            C=9,
            psi=10.5,  # any merge exceeds the cap
            epsilon=100,
        )
        sol = clarke_wright(inst)
        assert sorted(r.nodes for r in sol.routes) == [(1,), (2,), (3,)]

    def test_unreachable_shelter_raises(self):
        inst = sym_instance(
            coords=[(0, 0), (50, 0), (1, 0)],
            demands=[4, 4],
            m=2,
            Q=10,
            C=6,
            psi=30,
            epsilon=100,
        )
        with pytest.raises(ConstructionError):
            clarke_wright(inst)

    def test_routes_respect_psi_on_randoms(self, rng):
        for _ in range(10):
            inst = euclid_instance(rng, 5)
            sol = clarke_wright(inst)
            for r in sol.routes:
                assert r.duration <= inst.psi + 1e-9
            covered = sorted(v for r in sol.routes for v in r.nodes)
            assert covered == list(range(1, 6))

    def test_forbidden_arc_respected_in_merges(self, rng):
        inst = euclid_instance(rng, 4)
        cons = BranchingConstraints().forbid(edge(1, 2))
        sol = clarke_wright(inst, cons)
        for r in sol.routes:
            for a, b in zip(r.nodes, r.nodes[1:]):
                assert {a, b} != {1, 2}


class TestImproveRoutes:
    def test_two_node_route_unchanged_when_symmetric(self):
        inst = sym_instance(
            coords=[(0, 0), (3, 0), (0, 4)],
            demands=[2, 2],
            m=1,
            Q=5,
            C=3,
            psi=100,
            epsilon=100,
        )
        sol = clarke_wright(inst)
        improved = improve_routes(inst, sol)
        assert {r.nodes for r in improved.routes} == {
            tuple(r.nodes) for r in sol.routes
        } or sum(r.duration for r in improved.routes) <= sum(r.duration for r in sol.routes)

    def test_uncrosses_four_node_route(self):
        # Crossing order 1,3,2,4 on a square; optimum is the perimeter.
        inst = sym_instance(
            coords=[(0, 0), (1, 1), (1, 9), (9, 9), (9, 1)],
            demands=[2, 2, 2, 2],
            m=1,
            Q=8,
            C=6,
            psi=1000,
            epsilon=1000,
        )
        crossed = solution_from_routes(
            inst,
            [
                __import__("equiroute.model", fromlist=["RouteDelivery"]).RouteDelivery(
                    (1, 3, 2, 4), (1.5, 1.5, 1.5, 1.5), inst.route_duration([1, 3, 2, 4])
                )
            ],
        )
        improved = improve_routes(inst, crossed)
        best = min(
            inst.route_duration(p) for p in itertools.permutations([1, 2, 3, 4])
        )
        assert improved.routes[0].duration == pytest.approx(best)
        assert set(improved.routes[0].nodes) == {1, 2, 3, 4}

    def test_fixpoint_on_optimal_route(self, rng):
        inst = euclid_instance(rng, 4, m=1)
        best_order = min(
            itertools.permutations(range(1, 5)), key=lambda p: inst.route_duration(p)
        )
        if inst.route_duration(best_order) > inst.psi:
            pytest.skip("instance too tight")
        from equiroute.model import RouteDelivery

        sol = solution_from_routes(
            inst, [RouteDelivery(tuple(best_order), (0.0,) * 4, inst.route_duration(best_order))]
        )
        improved = improve_routes(inst, sol)
        assert improved.routes[0].duration == pytest.approx(inst.route_duration(best_order))


class TestFitness:
    def test_decomposition_recomputes(self, rng):
        inst = euclid_instance(rng, 5)
        cfg = TabuConfig.default_for(inst)
        lists = [[1, 2], [3], [4, 5]]
        durs = [inst.route_duration(r) for r in lists]
        fb = route_fitness(inst, lists, durs, cfg, gamma_over_theta=1e-3, epsilon=inst.epsilon)
        assert fb.total == pytest.approx(
            fb.iaaf + fb.time_overrun + fb.route_length_penalty + fb.fleet_penalty, abs=1e-12
        )

    def test_feasible_fitness_is_pure_objective(self, rng):
        inst = euclid_instance(rng, 4)
        sol = clarke_wright(inst)
        cfg = TabuConfig.default_for(inst)
        lists = [list(r.nodes) for r in sol.routes]
        durs = [r.duration for r in sol.routes]
        fb = route_fitness(inst, lists, durs, cfg, 1e-3, inst.epsilon)
        if len(lists) <= inst.m and sum(durs) <= inst.epsilon:
            assert fb.time_overrun == 0.0
            assert fb.route_length_penalty == 0.0
            assert fb.fleet_penalty == 0.0
            assert fb.total == pytest.approx(sol.f_iaaf, abs=1e-9)

    def test_penalties_positive_when_violating(self, rng):
        inst = euclid_instance(rng, 5, m=1)
        cfg = TabuConfig.default_for(inst)
        lists = [[1], [2], [3], [4], [5]]
        durs = [inst.route_duration(r) for r in lists]
        fb = route_fitness(inst, lists, durs, cfg, 1e-3, inst.epsilon)
        assert fb.fleet_penalty == pytest.approx(cfg.nu_nv * 4)


class TestTabuSearch:
    def test_feasible_initial_is_returned(self, rng):
        inst = euclid_instance(rng, 5)
        initial = clarke_wright(inst)
        durs = [r.duration for r in initial.routes]
        if len(initial.routes) > inst.m or sum(durs) > inst.epsilon:
            pytest.skip("initial infeasible for this draw")
        sols = tabu_search(inst, initial, seed=3)
        assert sols
        for sol in sols:
            assert not solution_violations(inst, sol)

    def test_fleet_reduction_under_pressure(self, rng):
        # Initial uses more routes than allowed; TS must reach <= m routes.
        for attempt in range(5):
            inst = euclid_instance(rng, 6, m=2, psi=None)
            singles = [[v] for v in inst.shelters()]
            from equiroute.model import RouteDelivery

            init = solution_from_routes(
                inst,
                [RouteDelivery((v,), (0.0,), inst.route_duration([v])) for v in inst.shelters()],
            )
            sols = tabu_search(inst, init, seed=attempt)
            if sols:
                assert all(len(s.routes) <= inst.m for s in sols)
                return
        pytest.skip("no feasible solution found on any attempt")

    def test_deterministic(self, rng):
        inst = euclid_instance(rng, 6)
        initial = clarke_wright(inst)
        a = tabu_search(inst, initial, seed=11)
        b = tabu_search(inst, initial, seed=11)
        assert [tuple(r.nodes for r in s.routes) for s in a] == [
            tuple(r.nodes for r in s.routes) for s in b
        ]

    def test_solutions_feasible_and_improving(self, rng):
        inst = euclid_instance(rng, 7)
        initial = clarke_wright(inst)
        sols = tabu_search(inst, initial, seed=5)
        values = [s.f_iaaf for s in sols]
        for sol in sols:
            assert not solution_violations(inst, sol)
