import itertools
import math

import numpy as np
import pytest

from equiroute.branching import BranchingConstraints, edge
from equiroute.master import DualPrices
from equiroute.model import RouteDelivery, route_violations
from equiroute.pricing import (
    RC_EPS,
    PricingContext,
    optimal_deliveries_for_route,
    price_exact,
    price_grasp,
    price_time_route,
    reduced_cost,
)

from conftest import euclid_instance, flat_instance


def zero_duals(n):
    return DualPrices(
        gini=np.zeros((n, n)), time=0.0, cover=np.zeros(n), fleet=0.0, supply=0.0
    )


def random_duals(rng, n, scale=1.0):
    return DualPrices(
        gini=rng.uniform(-0.02, 0.02, size=(n, n)) * scale / max(n, 1),
        time=-float(rng.uniform(0, 0.005)) * scale,
        cover=rng.uniform(-1.0, 4.0, size=n) * scale,
        fleet=-float(rng.uniform(0, 1.0)) * scale,
        supply=-float(rng.uniform(0, 0.4)) * scale,
    )


def rc_by_definition(inst, duals, gamma_over_theta, rd, mu_coeff=1.0):
    """Term-by-term re-summation, written independently of the package."""
    n = inst.n
    q = [0.0] * n
    for v, amount in zip(rd.nodes, rd.q):
        q[v - 1] = amount
    d = inst.demands
    total = 0.0
    for i in range(n):
        for j in range(n):
            total -= (d[j] * q[i] - d[i] * q[j]) * duals.gini[i][j]
    total -= rd.duration * duals.time
    for v in rd.nodes:
        total -= duals.cover[v - 1]
    total -= duals.fleet
    for i in range(n):
        total -= (duals.supply + mu_coeff) * q[i]
    total += gamma_over_theta * rd.duration
    return total


def exhaustive_best(ctx):
    """Independent oracle: all orders, all candidate delivery levels."""
    inst = ctx.inst
    best = math.inf
    n = inst.n
    D, Q, C = inst.total_demand, inst.Q, inst.C
    for size in range(1, n + 1):
        for subset in itertools.combinations(range(1, n + 1), size):
            d_set = sum(inst.demands[v - 1] for v in subset)
            if ctx.use_delivery_cuts:
                if d_set * C >= Q * D:
                    t_values = [Q / d_set]
                else:
                    lo, hi = C / D, min(1.0, Q / d_set)
                    t_values = [lo + (hi - lo) * k / 6 for k in range(7)]
                    if Q <= d_set:
                        t_values.append(Q / d_set)
            else:
                t_values = [0.0, min(1.0, Q / d_set)]
            for order in itertools.permutations(subset):
                if not ctx.constraints.route_complies(order):
                    continue
                dur = inst.route_duration(order)
                if dur > inst.psi + 1e-9:
                    continue
                for t in t_values:
                    q = tuple(t * inst.demands[v - 1] for v in order)
                    rd = RouteDelivery(order, q, dur)
                    best = min(best, rc_by_definition(inst, ctx.duals, ctx.gamma_over_theta, rd, ctx.mu_coeff))
    return best


class TestReducedCost:
    def test_zero_duals_example(self):
        inst = flat_instance([2, 3], Q=5, C=4)
        ctx = PricingContext(inst, zero_duals(2), gamma_over_theta=1e-3)
        rd = RouteDelivery((1, 2), (2.0, 3.0), 10.0)
        assert reduced_cost(ctx, rd) == pytest.approx(-4.99, abs=1e-12)

    def test_zero_deliveries_example(self):
        inst = flat_instance([2, 3], Q=5, C=4)
        ctx = PricingContext(inst, zero_duals(2), gamma_over_theta=1e-3)
        rd = RouteDelivery((1, 2), (0.0, 0.0), 10.0)
        assert reduced_cost(ctx, rd) == pytest.approx(0.01, abs=1e-12)

    def test_matches_independent_evaluator(self, rng):
        for _ in range(100):
            n = int(rng.integers(2, 7))
            d = rng.integers(1, 20, n).astype(float)
            inst = flat_instance(d, Q=float(d.sum() / 2), C=float(0.8 * d.sum()))
            duals = random_duals(rng, n)
            ctx = PricingContext(inst, duals, gamma_over_theta=1e-3)
            size = int(rng.integers(1, n + 1))
            nodes = tuple(int(v) for v in rng.choice(np.arange(1, n + 1), size, replace=False))
            q = tuple(float(inst.demands[v - 1]) * 0.3 for v in nodes)
            rd = RouteDelivery(nodes, q, inst.route_duration(nodes))
            assert reduced_cost(ctx, rd) == pytest.approx(
                rc_by_definition(inst, duals, 1e-3, rd), abs=1e-12
            )


class TestOptimalDeliveries:
    def test_capacity_share_branch(self):
        # Visit set at the capacity-share boundary takes the saturated level.
        inst = flat_instance([2, 4, 4], Q=3, C=5)
        ctx = PricingContext(inst, zero_duals(3), gamma_over_theta=1e-3)  # kappa = -1
        q = optimal_deliveries_for_route(ctx, [1, 2])
        assert q == pytest.approx([1.0, 2.0, 0.0])

    def test_positive_coefficient_floors_at_supply_share(self):
        inst = flat_instance([2, 4, 4], Q=5, C=5)
        duals = DualPrices(
            gini=np.zeros((3, 3)), time=0.0, cover=np.zeros(3), fleet=0.0, supply=-2.0
        )
        ctx = PricingContext(inst, duals, gamma_over_theta=1e-3)
        assert ctx.kappa == pytest.approx([1.0, 1.0, 1.0])
        q = optimal_deliveries_for_route(ctx, [1])
        assert q == pytest.approx([1.0, 0.0, 0.0])  # d1 * C / D

    def test_negative_coefficient_fills_to_demand(self):
        inst = flat_instance([2, 4, 4], Q=5, C=5)
        ctx = PricingContext(inst, zero_duals(3), gamma_over_theta=1e-3)
        q = optimal_deliveries_for_route(ctx, [1])
        assert q == pytest.approx([2.0, 0.0, 0.0])  # min(d1, d1 Q / D_r)

    def test_beats_grid_of_multipliers(self, rng):
        for _ in range(40):
            n = int(rng.integers(2, 7))
            d = rng.integers(1, 25, n).astype(float)
            inst = flat_instance(d, Q=float(rng.uniform(d.max() / 2, d.sum())), C=float(0.75 * d.sum()))
            duals = random_duals(rng, n)
            ctx = PricingContext(inst, duals, gamma_over_theta=1e-3)
            size = int(rng.integers(1, n + 1))
            nodes = sorted(int(v) for v in rng.choice(np.arange(1, n + 1), size, replace=False))
            q_opt = optimal_deliveries_for_route(ctx, nodes)
            dur = inst.route_duration(nodes)
            rd_opt = RouteDelivery(tuple(nodes), tuple(q_opt[v - 1] for v in nodes), dur)
            rc_opt = reduced_cost(ctx, rd_opt)
            d_set = sum(inst.demands[v - 1] for v in nodes)
            if d_set * inst.C >= inst.Q * inst.total_demand:
                grid = [inst.Q / d_set]
            else:
                lo, hi = inst.C / inst.total_demand, min(1.0, inst.Q / d_set)
                grid = list(np.linspace(lo, hi, 200))
                if inst.Q <= d_set:
                    grid.append(inst.Q / d_set)  # exactly-saturated option
            for t in grid:
                q = tuple(t * inst.demands[v - 1] for v in nodes)
                rc = reduced_cost(ctx, RouteDelivery(tuple(nodes), q, dur))
                assert rc_opt <= rc + 1e-9


class TestPriceExact:
    def test_matches_exhaustive_oracle(self, rng):
        for trial in range(15):
            n = int(rng.integers(2, 6))
            inst = euclid_instance(rng, n)
            duals = random_duals(rng, n)
            ctx = PricingContext(inst, duals, gamma_over_theta=1e-3)
            cols, min_rc = price_exact(ctx)
            oracle = exhaustive_best(ctx)
            if min_rc < -RC_EPS:
                assert min_rc == pytest.approx(oracle, abs=1e-9), f"trial {trial}"
                assert cols
                assert reduced_cost(ctx, cols[0]) == pytest.approx(min_rc, abs=1e-9)
            else:
                assert oracle >= -RC_EPS - 1e-12
            for rd in cols:
                assert reduced_cost(ctx, rd) < -RC_EPS
                assert not route_violations(inst, rd)

    def test_zero_duals_best_column(self, rng):
        inst = euclid_instance(rng, 5)
        ctx = PricingContext(inst, zero_duals(5), gamma_over_theta=1e-3)
        cols, min_rc = price_exact(ctx)
        assert min_rc == pytest.approx(exhaustive_best(ctx), abs=1e-9)

    def test_forbidden_isolation(self, rng):
        inst = euclid_instance(rng, 4)
        cons = BranchingConstraints()
        for j in range(5):
            if j != 2:
                cons = cons.forbid(edge(2, j))
        ctx = PricingContext(inst, zero_duals(4), gamma_over_theta=1e-3, constraints=cons)
        cols, _min_rc = price_exact(ctx)
        assert cols
        for rd in cols:
            assert 2 not in rd.nodes

    def test_unreachable_psi(self, rng):
        inst = euclid_instance(rng, 3)
        tight = inst.__class__(
            demands=inst.demands,
            travel=inst.travel,
            m=inst.m,
            Q=inst.Q,
            C=inst.C,
            psi=0.5,
            epsilon=inst.epsilon,
            lam=inst.lam,
        )
        ctx = PricingContext(tight, zero_duals(3), gamma_over_theta=1e-3)
        cols, min_rc = price_exact(ctx)
        assert cols == []
        assert min_rc == math.inf

    def test_emitted_columns_demand_proportional(self, rng):
        for _ in range(10):
            n = int(rng.integers(3, 7))
            inst = euclid_instance(rng, n)
            ctx = PricingContext(inst, random_duals(rng, n), gamma_over_theta=1e-3)
            cols, _ = price_exact(ctx)
            for rd in cols:
                ratios = [amount / inst.demands[v - 1] for v, amount in zip(rd.nodes, rd.q)]
                assert max(ratios) - min(ratios) <= 1e-9

    def test_forced_edge_compliance(self, rng):
        for trial in range(20):
            n = 5
            inst = euclid_instance(rng, n)
            cons = BranchingConstraints().force(edge(1, 2))
            if trial % 2:
                cons = cons.forbid(edge(3, 4))
            ctx = PricingContext(inst, random_duals(rng, n), gamma_over_theta=1e-3, constraints=cons)
            cols, min_rc = price_exact(ctx)
            for rd in cols:
                assert cons.route_complies(rd.nodes)
            if min_rc < -RC_EPS:
                assert min_rc == pytest.approx(exhaustive_best(ctx), abs=1e-9)


class TestPriceGrasp:
    def test_nonnegative_scores_yield_nothing(self):
        inst = flat_instance([2, 3], Q=5, C=4)
        duals = DualPrices(
            gini=np.zeros((2, 2)), time=0.0, cover=np.array([-2.0, -2.0]), fleet=0.0, supply=0.0
        )
        ctx = PricingContext(inst, duals, gamma_over_theta=1e-3)
        assert np.min(ctx.node_scores) >= 0
        assert price_grasp(ctx) == []

    def test_singleton_instance_against_exact(self, rng):
        inst = euclid_instance(rng, 1, m=1)
        ctx = PricingContext(inst, zero_duals(1), gamma_over_theta=1e-3)
        exact_cols, min_rc = price_exact(ctx)
        grasp_cols = price_grasp(ctx, restarts=3, seed=1)
        if min_rc < -RC_EPS:
            assert grasp_cols
            assert grasp_cols[0].key() == exact_cols[0].key()
        else:
            assert grasp_cols == []

    def test_returned_columns_valid(self, rng):
        for trial in range(20):
            n = 6
            inst = euclid_instance(rng, n)
            ctx = PricingContext(inst, random_duals(rng, n), gamma_over_theta=1e-3)
            cols = price_grasp(ctx, restarts=20, seed=trial)
            assert len(cols) <= ctx.max_grasp
            for rd in cols:
                assert reduced_cost(ctx, rd) < -RC_EPS
                assert not route_violations(inst, rd)

    def test_exact_dominates_grasp(self, rng):
        for trial in range(12):
            n = int(rng.integers(3, 9))
            inst = euclid_instance(rng, n)
            ctx = PricingContext(inst, random_duals(rng, n), gamma_over_theta=1e-3)
            _, min_rc = price_exact(ctx)
            for rd in price_grasp(ctx, restarts=8, seed=trial):
                assert min_rc <= reduced_cost(ctx, rd) + 1e-9

    def test_deterministic_given_seed(self, rng):
        inst = euclid_instance(rng, 6)
        ctx = PricingContext(inst, random_duals(rng, 6), gamma_over_theta=1e-3)
        a = [rd.key() for rd in price_grasp(ctx, restarts=5, seed=7)]
        b = [rd.key() for rd in price_grasp(ctx, restarts=5, seed=7)]
        assert a == b


class TestTimePricing:
    def test_min_time_route(self, rng):
        inst = euclid_instance(rng, 4)
        cols, min_rc = price_time_route(inst, np.zeros(4), 0.0)
        # Cheapest single round trip is the minimum with zero duals.
        best = min(inst.route_duration([v]) for v in inst.shelters())
        assert min_rc == pytest.approx(best, abs=1e-9)

    def test_max_time_mode(self, rng):
        inst = euclid_instance(rng, 4)
        cols, min_rc = price_time_route(inst, np.zeros(4), 0.0, maximize=True)
        durations = []
        for size in range(1, 5):
            for order in itertools.permutations(range(1, 5), size):
                dur = inst.route_duration(order)
                if dur <= inst.psi + 1e-9:
                    durations.append(dur)
        assert -min_rc == pytest.approx(max(durations), abs=1e-9)
