"""Column generation pricing: exact enumeration and the GRASP heuristic.

A column's reduced cost decomposes into a per-node delivery coefficient
(kappa), a per-node visit gain (the cover dual), a duration term with
coefficient gamma/theta minus the time dual (always positive), and the
fleet dual as a constant. For a fixed visit set the deliveries are
demand-proportional with a single multiplier t, optimal at an interval
endpoint, which is what makes both the exact search and the heuristic
cheap to evaluate per move.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import enumcore
from .branching import BranchingConstraints, edge, forbidden_matrix, route_edges
from .master import DualPrices
from .model import Instance, ModelError, RouteDelivery

RC_EPS = 1e-7


@dataclass(frozen=True)
class PricingContext:
    inst: Instance
    duals: DualPrices
    gamma_over_theta: float
    constraints: BranchingConstraints = field(default_factory=BranchingConstraints)
    max_grasp: int = 10
    max_exact: int = 2
    alpha: float = 0.8
    mu_coeff: float = 1.0
    use_delivery_cuts: bool = True

    def __post_init__(self):
        if self.max_grasp < 1 or self.max_exact < 1:
            raise ModelError("column caps must be at least 1")

    @cached_property
    def kappa(self) -> np.ndarray:
        """Reduced-cost coefficient of one delivered unit at each shelter."""
        d = self.inst.demand_array
        g = self.duals.gini
        skew = (g - g.T) @ d
        return -(self.duals.supply + self.mu_coeff) - skew

    @cached_property
    def node_scores(self) -> np.ndarray:
        """Greedy attractiveness of a shelter: kappa minus its cover dual."""
        return self.kappa - self.duals.cover

    @property
    def time_coeff(self) -> float:
        return self.gamma_over_theta - self.duals.time

    @property
    def const_term(self) -> float:
        return -self.duals.fleet


def reduced_cost(ctx: PricingContext, rd: RouteDelivery) -> float:
    """Reduced cost of a column under the context duals, from the definition."""
    inst = ctx.inst
    q = rd.q_vector(inst.n)
    d = inst.demand_array
    g = ctx.duals.gini
    pair_term = -float(np.sum((d[None, :] * q[:, None] - d[:, None] * q[None, :]) * g))
    cover_term = -float(sum(ctx.duals.cover[v - 1] for v in rd.nodes))
    return (
        pair_term
        - rd.duration * ctx.duals.time
        + cover_term
        - ctx.duals.fleet
        - float((ctx.duals.supply + ctx.mu_coeff) * q.sum())
        + ctx.gamma_over_theta * rd.duration
    )


def delivery_multiplier(ctx: PricingContext, d_set: float, sum_kd: float) -> float:
    """Optimal proportional-delivery multiplier for a fixed visit set."""
    inst = ctx.inst
    if ctx.use_delivery_cuts and d_set * inst.C >= inst.Q * inst.total_demand:
        return inst.Q / d_set
    if ctx.use_delivery_cuts:
        return min(1.0, inst.Q / d_set) if sum_kd < 0.0 else inst.C / inst.total_demand
    return min(1.0, inst.Q / d_set) if sum_kd < 0.0 else 0.0


def optimal_deliveries_for_route(ctx: PricingContext, node_set) -> np.ndarray:
    """Reduced-cost-minimizing deliveries for a fixed visit set.

    Demand-proportional: anchored at the smallest-demand shelter (lowest
    index on ties), scaled by the endpoint multiplier. Returns a full
    length-n vector, zero off the set.
    """
    nodes = sorted(set(int(v) for v in node_set))
    if not nodes:
        raise ModelError("node set must be nonempty")
    inst = ctx.inst
    d = inst.demand_array
    kappa = ctx.kappa
    d_set = float(sum(d[v - 1] for v in nodes))
    anchor = min(nodes, key=lambda v: (d[v - 1], v))
    sum_kd = float(sum(kappa[v - 1] * d[v - 1] for v in nodes))
    t = delivery_multiplier(ctx, d_set, sum_kd)
    q = np.zeros(inst.n)
    anchor_q = t * d[anchor - 1]
    for v in nodes:
        q[v - 1] = anchor_q * d[v - 1] / d[anchor - 1]
    return q


def _kernel_args(inst: Instance, constraints: BranchingConstraints):
    n = inst.n
    forced_p1 = np.zeros(n, dtype=np.int64)
    forced_p2 = np.zeros(n, dtype=np.int64)
    partners = constraints.forced_partners(n)
    for v, ps in partners.items():
        if len(ps) > 0:
            forced_p1[v - 1] = ps[0]
        if len(ps) > 1:
            forced_p2[v - 1] = ps[1]
    depot_forced = np.zeros(n, dtype=np.uint8)
    for v in constraints.forced_depot():
        depot_forced[v - 1] = 1
    return {
        "n": n,
        "travel": inst.travel_array,
        "demands": inst.demand_array,
        "total_demand": inst.total_demand,
        "Q": inst.Q,
        "C": inst.C,
        "psi": inst.psi,
        "forbidden": forbidden_matrix(constraints, n),
        "forced_p1": forced_p1,
        "forced_p2": forced_p2,
        "depot_forced": depot_forced,
        "has_forced": bool(constraints.forced),
    }


def price_exact(ctx: PricingContext) -> tuple[list[RouteDelivery], float]:
    """Exhaustive minimum-reduced-cost pricing.

    Returns up to max_exact columns with reduced cost < -1e-7 (exact top-k
    over distinct visit sets) and the global minimum reduced cost, which is
    +inf when no branching-compliant route exists at all.
    """
    args = _kernel_args(ctx.inst, ctx.constraints)
    cols, min_rc, _leaves, _expanded = enumcore.enumerate_columns(
        args["n"],
        args["travel"],
        args["demands"],
        args["total_demand"],
        args["Q"],
        args["C"],
        args["psi"],
        ctx.kappa,
        ctx.duals.cover,
        ctx.const_term,
        ctx.time_coeff,
        True,
        ctx.use_delivery_cuts,
        args["forbidden"],
        args["forced_p1"],
        args["forced_p2"],
        args["depot_forced"],
        args["has_forced"],
        RC_EPS,
        ctx.max_exact,
    )
    inst = ctx.inst
    out = []
    for _rc, nodes, t in cols:
        q = tuple(t * inst.demands[v - 1] for v in nodes)
        out.append(RouteDelivery(nodes, q, inst.route_duration(nodes)))
    return out, min_rc


def price_time_route(
    inst: Instance,
    cover_duals: np.ndarray,
    fleet_dual: float,
    constraints: BranchingConstraints | None = None,
    maximize: bool = False,
) -> tuple[list[RouteDelivery], float]:
    """Pricing for the pure travel-time master (used for the f2 range).

    Minimizes (or maximizes, via negation) duration minus visit duals over
    feasible routes; emitted columns carry zero deliveries.
    """
    constraints = constraints or BranchingConstraints()
    n = inst.n
    args = _kernel_args(inst, constraints)
    zeros = np.zeros(n)
    cols, min_rc, _l, _e = enumcore.enumerate_columns(
        n,
        args["travel"],
        args["demands"],
        inst.total_demand,
        inst.Q,
        inst.C,
        inst.psi,
        zeros,
        np.asarray(cover_duals, dtype=float),
        -float(fleet_dual),
        -1.0 if maximize else 1.0,
        False,
        False,
        args["forbidden"],
        args["forced_p1"],
        args["forced_p2"],
        args["depot_forced"],
        args["has_forced"],
        RC_EPS,
        2,
    )
    out = [
        RouteDelivery(nodes, tuple(0.0 for _ in nodes), inst.route_duration(nodes))
        for _rc, nodes, _t in cols
    ]
    return out, min_rc


# ---------------------------------------------------------------------------
# GRASP heuristic


def _set_reduced_cost(ctx: PricingContext, nodes, duration: float) -> tuple[float, float]:
    """Reduced cost of a route over ``nodes`` with optimal deliveries."""
    inst = ctx.inst
    d = inst.demand_array
    kappa = ctx.kappa
    d_set = 0.0
    sum_kd = 0.0
    cover = 0.0
    for v in nodes:
        d_set += d[v - 1]
        sum_kd += kappa[v - 1] * d[v - 1]
        cover += ctx.duals.cover[v - 1]
    t = delivery_multiplier(ctx, d_set, sum_kd)
    rc = duration * ctx.time_coeff + ctx.const_term - cover + t * sum_kd
    return rc, t

def _insertion_duration(inst: Instance, nodes, pos: int, v: int, duration: float) -> float:
    prev = nodes[pos - 1] if pos > 0 else 0
    nxt = nodes[pos] if pos < len(nodes) else 0
    t = inst.travel
    return duration + t[prev][v] + t[v][nxt] - t[prev][nxt]


def _arcs_ok(ctx: PricingContext, nodes) -> bool:
    forbidden = ctx.constraints.forbidden
    if not forbidden:
        return True
    return not any(e in forbidden for e in route_edges(nodes))


def _insertion_arcs_ok(ctx: PricingContext, nodes, pos: int, v: int) -> bool:
    """Arc check for inserting v at pos into an already-compliant route."""
    forbidden = ctx.constraints.forbidden
    if not forbidden:
        return True
    prev = nodes[pos - 1] if pos > 0 else 0
    nxt = nodes[pos] if pos < len(nodes) else 0
    return edge(prev, v) not in forbidden and edge(v, nxt) not in forbidden


class _Collector:
    """Per-visit-set best negative columns, merged deterministically."""

    def __init__(self, ctx: PricingContext):
        self.ctx = ctx
        self.items: dict[frozenset, tuple[float, tuple, float]] = {}

    def offer(self, rc: float, nodes: tuple, t: float):
        if rc >= -RC_EPS:
            return
        if not self.ctx.constraints.route_complies(nodes):
            return
        key = frozenset(nodes)
        cur = self.items.get(key)
        if cur is None or (rc, nodes) < (cur[0], cur[1]):
            self.items[key] = (rc, nodes, t)

    def routes(self, cap: int) -> list[RouteDelivery]:
        inst = self.ctx.inst
        ranked = sorted(self.items.values(), key=lambda it: (it[0], it[1]))[:cap]
        out = []
        for _rc, nodes, t in ranked:
            q = tuple(t * inst.demands[v - 1] for v in nodes)
            out.append(RouteDelivery(nodes, q, inst.route_duration(nodes)))
        return out


def _grasp_construct(ctx: PricingContext, rng) -> tuple[list[int], float]:
    """Greedy randomized route construction from node scores."""
    inst = ctx.inst
    sigma = ctx.node_scores
    unvisited = [v for v in inst.shelters()]
    nodes: list[int] = []
    duration = 0.0
    current_rc = ctx.const_term  # empty route: no visits, no travel
    while unvisited:
        scores = [sigma[v - 1] for v in unvisited]
        smin = min(scores)
        if smin >= 0.0:
            break
        rcl = [v for v, s in zip(unvisited, scores) if s <= ctx.alpha * smin]
        pick = rcl[int(rng.integers(len(rcl)))]
        best = None
        for pos in range(len(nodes) + 1):
            if not _insertion_arcs_ok(ctx, nodes, pos, pick):
                continue
            dur = _insertion_duration(inst, nodes, pos, pick, duration)
            if dur > inst.psi + 1e-9:
                continue
            cand = nodes[:pos] + [pick] + nodes[pos:]
            rc, t = _set_reduced_cost(ctx, cand, dur)
            if best is None or rc < best[0]:
                best = (rc, cand, dur)
        if best is not None and best[0] <= current_rc:
            _, nodes, duration = best
            current_rc = best[0]
        unvisited.remove(pick)
    return nodes, duration


def _grasp_improve(ctx: PricingContext, nodes: list[int], duration: float, collector: _Collector):
    """Exchange then insertion local search, collecting negative columns."""
    inst = ctx.inst
    if nodes:
        rc, t = _set_reduced_cost(ctx, nodes, duration)
        collector.offer(rc, tuple(nodes), t)
    else:
        return
    current_rc = rc
    improved = True
    while improved:
        improved = False
        # Exchange an unvisited shelter for a visited one, same position.
        best = None
        in_route = set(nodes)
        for v in inst.shelters():
            if v in in_route:
                continue
            for pos in range(len(nodes)):
                prev = nodes[pos - 1] if pos > 0 else 0
                nxt = nodes[pos + 1] if pos + 1 < len(nodes) else 0
                forb = ctx.constraints.forbidden
                if forb and (edge(prev, v) in forb or edge(v, nxt) in forb):
                    continue
                cand = nodes[:pos] + [v] + nodes[pos + 1 :]
                dur = inst.route_duration(cand)
                if dur > inst.psi + 1e-9:
                    continue
                rc, t = _set_reduced_cost(ctx, cand, dur)
                collector.offer(rc, tuple(cand), t)
                if best is None or rc < best[0]:
                    best = (rc, cand, dur)
        if best is not None and best[0] < current_rc - 1e-12:
            current_rc, nodes, duration = best
            improved = True
        # Insert an unvisited shelter at its best feasible position.
        best = None
        in_route = set(nodes)
        for v in inst.shelters():
            if v in in_route:
                continue
            for pos in range(len(nodes) + 1):
                if not _insertion_arcs_ok(ctx, nodes, pos, v):
                    continue
                dur = _insertion_duration(inst, nodes, pos, v, duration)
                if dur > inst.psi + 1e-9:
                    continue
                cand = nodes[:pos] + [v] + nodes[pos:]
                rc, t = _set_reduced_cost(ctx, cand, dur)
                collector.offer(rc, tuple(cand), t)
                if best is None or rc < best[0]:
                    best = (rc, cand, dur)
        if best is not None and best[0] < current_rc - 1e-12:
            current_rc, nodes, duration = best
            improved = True


def price_grasp(ctx: PricingContext, restarts: int = 5, seed: int = 0) -> list[RouteDelivery]:
    """Randomized construction plus local search; never claims optimality.

    Restarts use independently derived seeds and results merge by
    (reduced cost, nodes), so the output is restart-order independent.
    """
    sigma = ctx.node_scores
    if float(np.min(sigma)) >= 0.0:
        return []
    collector = _Collector(ctx)
    seeds = np.random.SeedSequence([seed, 0x67A5]).spawn(restarts)
    for ss in seeds:
        rng = np.random.default_rng(ss)
        nodes, duration = _grasp_construct(ctx, rng)
        _grasp_improve(ctx, nodes, duration, collector)
    return collector.routes(ctx.max_grasp)
