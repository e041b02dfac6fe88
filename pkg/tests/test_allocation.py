import numpy as np
import pytest

from equiroute.allocation import (
    AllocationResult,
    RoutePartition,
    allocate_optimal,
    allocate_oracle,
    check_delivery_structure,
    partition_objective,
    perfect_equity_allocation,
)
from equiroute.model import ModelError, evaluate_iaaf

from conftest import flat_instance


def random_partition(rng, n, max_routes):
    k = int(rng.integers(1, min(max_routes, n) + 1))
    labels = rng.integers(0, k, size=n)
    labels[rng.permutation(n)[:k]] = np.arange(k)  # every route nonempty
    sets = [[i + 1 for i in range(n) if labels[i] == r] for r in range(k)]
    return RoutePartition.from_lists([s for s in sets if s])


class TestAlgorithmExamples:
    def test_saturated_route(self):
        # One route far over its capacity share gets pinned at Q.
        inst = flat_instance([10, 2], Q=4, C=6)
        part = RoutePartition.from_lists([[1], [2]])
        res = allocate_optimal(inst, part)
        assert res.xi == pytest.approx((4.0, 2.0))
        assert res.v == pytest.approx((4.0, 2.0))
        oracle = allocate_oracle(inst, part)
        assert res.objective == pytest.approx(oracle.objective, abs=1e-6)

    def test_proportional_share(self):
        # All routes inside the capacity share: perfect-equity split of C.
        inst = flat_instance([3, 1, 4], Q=3, C=4)
        part = RoutePartition.from_lists([[1, 2], [3]])
        res = allocate_optimal(inst, part)
        assert res.v == pytest.approx((1.5, 0.5, 2.0))
        # Equity term vanishes.
        assert res.objective == pytest.approx(sum(inst.demands) - 4.0, abs=1e-12)
        oracle = allocate_oracle(inst, part)
        assert res.objective == pytest.approx(oracle.objective, abs=1e-6)

    def test_single_route_supply_bound(self):
        inst = flat_instance([5, 3], Q=100, C=6)
        part = RoutePartition.from_lists([[1, 2]])
        res = allocate_optimal(inst, part)
        assert res.v == pytest.approx((6 * 5 / 8, 6 * 3 / 8))
        oracle = allocate_oracle(inst, part)
        assert res.objective == pytest.approx(oracle.objective, abs=1e-6)

    def test_late_round_saturation(self):
        # Route 2 becomes a violator only after route 1 is fixed.
        inst = flat_instance([12, 5, 1], Q=3, C=9)
        part = RoutePartition.from_lists([[1], [2], [3]])
        res = allocate_optimal(inst, part)
        assert res.xi == pytest.approx((3.0, 3.0, 1.0))
        oracle = allocate_oracle(inst, part)
        assert res.objective == pytest.approx(oracle.objective, abs=1e-6)
        assert check_delivery_structure(inst, part, res)


class TestOracle:
    def test_degenerate_single_shelter(self):
        inst = flat_instance([4, 1], Q=4, C=4)
        part = RoutePartition.from_lists([[1], [2]])
        res = allocate_oracle(inst, part)
        assert sum(res.xi) == pytest.approx(4.0)

    def test_agrees_with_direct_evaluation(self, rng):
        for _ in range(50):
            n = int(rng.integers(2, 7))
            d = rng.integers(1, 20, n).astype(float)
            inst = flat_instance(d, Q=float(rng.uniform(1, d.sum())), C=float(0.8 * d.sum()))
            part = random_partition(rng, n, 3)
            res = allocate_oracle(inst, part)
            assert res.objective == pytest.approx(evaluate_iaaf(inst, res.v), abs=1e-7)


class TestExactnessCorpus:
    def test_optimal_matches_oracle(self, rng):
        for trial in range(120):
            n = int(rng.integers(2, 11))
            d = rng.integers(1, 30, n).astype(float)
            inst = flat_instance(
                d,
                Q=float(rng.uniform(d.max() * 0.3, d.sum())),
                C=float(rng.uniform(0.2, 0.95) * d.sum()),
            )
            part = random_partition(rng, n, 4)
            fast = allocate_optimal(inst, part)
            slow = allocate_oracle(inst, part)
            assert fast.objective == pytest.approx(slow.objective, abs=1e-6), f"trial {trial}"
            assert fast.objective == pytest.approx(evaluate_iaaf(inst, fast.v), abs=1e-9)
            assert check_delivery_structure(inst, part, fast), f"trial {trial}"
            # Demand proportionality inside each route.
            for k, nodes in enumerate(part.node_sets):
                ratios = [fast.v[v - 1] / inst.demands[v - 1] for v in nodes]
                assert max(ratios) - min(ratios) <= 1e-9

    def test_saturation_conditions(self, rng):
        for _ in range(100):
            n = int(rng.integers(2, 9))
            d = rng.integers(1, 25, n).astype(float)
            inst = flat_instance(d, Q=float(rng.uniform(1, d.sum())), C=float(0.7 * d.sum()))
            part = random_partition(rng, n, 4)
            Dk = part.demand_totals(inst)
            res = allocate_optimal(inst, part)
            D, Q, C = inst.total_demand, inst.Q, inst.C
            if all(dk / D <= Q / C for dk in Dk):
                for k, dk in enumerate(Dk):
                    assert res.xi[k] == pytest.approx(C / D * dk, abs=1e-9)
                assert res.objective == pytest.approx(D - C, abs=1e-7)
            for k, dk in enumerate(Dk):
                if dk / D > Q / C:
                    assert res.xi[k] == pytest.approx(Q, abs=1e-9)


class TestStructureCheck:
    def test_rejects_constructed_violation(self):
        inst = flat_instance([10, 2], Q=4, C=6)
        part = RoutePartition.from_lists([[1], [2]])
        bad = AllocationResult(v=(1.0, 2.0), xi=(1.0, 2.0), objective=0.0)
        assert not check_delivery_structure(inst, part, bad)

    def test_tie_is_non_violating(self):
        # D_k/D == Q/C exactly: proportional branch applies.
        inst = flat_instance([5, 5], Q=4, C=8)
        part = RoutePartition.from_lists([[1], [2]])
        res = allocate_optimal(inst, part)
        assert res.xi == pytest.approx((4.0, 4.0))
        assert check_delivery_structure(inst, part, res)


class TestLemmaProjection:
    def test_projection_never_increases(self, rng):
        # Re-projecting any feasible deliveries to demand-proportional
        # form with the same per-route totals cannot hurt the objective.
        for _ in range(200):
            n = int(rng.integers(2, 8))
            d = rng.uniform(1, 20, n)
            inst = flat_instance(d, Q=float(d.sum()), C=float(0.8 * d.sum()))
            part = random_partition(rng, n, 3)
            raw = rng.uniform(0, 1, n) * d
            scale = min(1.0, inst.C / max(raw.sum(), 1e-12))
            raw *= scale
            proj = np.array(raw)
            for nodes in part.node_sets:
                idx = [v - 1 for v in nodes]
                tot = raw[idx].sum()
                dk = d[idx].sum()
                proj[idx] = tot * d[idx] / dk
            assert evaluate_iaaf(inst, proj) <= evaluate_iaaf(inst, raw) + 1e-9


class TestEdgeCases:
    def test_supply_nearly_exhausted_by_saturated_route(self):
        inst = flat_instance([30, 5, 1], Q=5, C=10)
        part = RoutePartition.from_lists([[1], [2], [3]])
        res = allocate_optimal(inst, part)
        assert res.xi[0] == pytest.approx(5.0)
        assert res.xi[1] == pytest.approx(25 / 6)
        assert res.xi[2] == pytest.approx(5 / 6)
        oracle = allocate_oracle(inst, part)
        assert res.objective == pytest.approx(oracle.objective, abs=1e-6)

    def test_empty_partition_rejected(self):
        with pytest.raises(ModelError):
            RoutePartition(())

    def test_perfect_equity_allocation(self):
        inst = flat_instance([4, 4, 8], Q=3, C=10)
        part = RoutePartition.from_lists([[1, 2], [3]])
        res = perfect_equity_allocation(inst, part)
        t = min(10 / 16, 3 / 8)
        assert res.v == pytest.approx((4 * t, 4 * t, 8 * t))
        assert res.objective == pytest.approx(0.0, abs=1e-12)

    def test_partition_objective_matches_pointwise(self, rng):
        inst = flat_instance([3, 5, 2], Q=4, C=6)
        part = RoutePartition.from_lists([[1, 3], [2]])
        res = allocate_optimal(inst, part)
        assert partition_objective(
            res.xi, part.demand_totals(inst), inst.lam, inst.total_demand
        ) == pytest.approx(evaluate_iaaf(inst, res.v), abs=1e-9)
