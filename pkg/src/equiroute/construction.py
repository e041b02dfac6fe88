"""Initial solutions and columns: savings construction plus tabu search.

The savings heuristic merges routes while any merger fits the duration
cap, even at negative savings, to drive the route count down; vehicle
capacity is ignored here because deliveries are re-optimized per route
set. The tabu search then relocates nodes between routes under penalty
terms for duration, time-budget and fleet violations, emitting every new
best feasible solution it encounters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .allocation import RoutePartition, allocate_optimal
from .branching import BranchingConstraints
from .model import Instance, ModelError, RouteDelivery, Solution, solution_from_routes


class ConstructionError(ModelError):
    """No initial routes exist (some shelter unreachable within Psi)."""


NEW_ROUTE = -1  # pseudo-token: relocate a node onto a fresh route


@dataclass(frozen=True)
class TabuConfig:
    eta: int  # nodes sampled for relocation per iteration
    n_near: int  # neighborhood size for insertion pruning
    tenure_min: int = 2
    tenure_max: int = 6
    it_no: int = 20  # consecutive non-improving iterations before stopping
    nu_mlr: float = 0.0  # route-duration violation weight
    nu_nv: float = 0.0  # fleet violation weight

    def __post_init__(self):
        if min(self.eta, self.n_near, self.tenure_min, self.tenure_max, self.it_no) <= 0:
            raise ModelError("tabu parameters must be positive")
        if self.nu_mlr <= 0 or self.nu_nv <= 0:
            raise ModelError("penalty weights must be positive")

    @staticmethod
    def default_for(inst: Instance) -> "TabuConfig":
        t = inst.travel_array
        penalty = 10.0 * float(t.max())
        return TabuConfig(
            eta=math.ceil(inst.n / 5),
            n_near=math.ceil(inst.n / 3),
            nu_mlr=penalty,
            nu_nv=penalty,
        )


@dataclass(frozen=True)
class FitnessBreakdown:
    iaaf: float
    time_overrun: float
    route_length_penalty: float
    fleet_penalty: float

    @property
    def total(self) -> float:
        return self.iaaf + self.time_overrun + self.route_length_penalty + self.fleet_penalty


def route_fitness(
    inst: Instance,
    node_lists,
    durations,
    cfg: TabuConfig,
    gamma_over_theta: float,
    epsilon: float,
) -> FitnessBreakdown:
    """Penalized objective of a (possibly infeasible) set of routes."""
    part = RoutePartition.from_lists(node_lists)
    alloc = allocate_optimal(inst, part)
    total_t = float(sum(durations))
    overrun = gamma_over_theta * max(0.0, total_t - epsilon)
    mlr = cfg.nu_mlr * float(sum(max(0.0, t - inst.psi) for t in durations))
    nv = cfg.nu_nv * max(0, len(node_lists) - inst.m)
    return FitnessBreakdown(alloc.objective, overrun, mlr, nv)


def _routes_feasible(inst: Instance, durations, count: int, epsilon: float) -> bool:
    return (
        count <= inst.m
        and all(t <= inst.psi + 1e-9 for t in durations)
        and sum(durations) <= epsilon + 1e-9
    )


def _solution_from_partition(inst: Instance, node_lists) -> Solution:
    part = RoutePartition.from_lists(node_lists)
    alloc = allocate_optimal(inst, part)
    routes = []
    for nodes in node_lists:
        q = tuple(alloc.v[v - 1] for v in nodes)
        routes.append(RouteDelivery(tuple(nodes), q, inst.route_duration(nodes)))
    return solution_from_routes(inst, routes)


def clarke_wright(
    inst: Instance,
    constraints: BranchingConstraints | None = None,
    equity_weight: float = 1.0,
) -> Solution:
    """Parallel savings construction, equity-aware.

    The saving of appending one route after another combines the classic
    travel saving with the reduction of the dispersion term of the
    allocation objective, weighted by ``equity_weight``. Merging continues
    while any duration-feasible merger exists, regardless of sign.
    """
    constraints = constraints or BranchingConstraints()
    t = inst.travel
    routes: list[list[int]] = []
    for v in inst.shelters():
        if t[0][v] + t[v][0] > inst.psi + 1e-9:
            raise ConstructionError(f"shelter {v} unreachable within Psi")
        routes.append([v])

    def equity_term(node_lists) -> float:
        part = RoutePartition.from_lists(node_lists)
        alloc = allocate_optimal(inst, part)
        coverage = float(sum(alloc.v))
        return alloc.objective - (inst.total_demand - coverage)

    while len(routes) > 1:
        current_equity = equity_term(routes)
        durations = [inst.route_duration(r) for r in routes]
        best = None
        for a in range(len(routes)):
            for b in range(len(routes)):
                if a == b:
                    continue
                tail, head = routes[a][-1], routes[b][0]
                if constraints.is_forbidden(tail, head):
                    continue
                merged_dur = (
                    durations[a] + durations[b] - t[tail][0] - t[0][head] + t[tail][head]
                )
                if merged_dur > inst.psi + 1e-9:
                    continue
                saving = t[tail][0] + t[0][head] - t[tail][head]
                if equity_weight:
                    merged_lists = [
                        routes[k] for k in range(len(routes)) if k not in (a, b)
                    ] + [routes[a] + routes[b]]
                    saving += equity_weight * (current_equity - equity_term(merged_lists))
                if best is None or saving > best[0] + 1e-12:
                    best = (saving, a, b)
        if best is None:
            break
        _, a, b = best
        merged = routes[a] + routes[b]
        routes = [routes[k] for k in range(len(routes)) if k not in (a, b)] + [merged]

    return _solution_from_partition(inst, routes)


def improve_routes(
    inst: Instance,
    sol: Solution,
    constraints: BranchingConstraints | None = None,
) -> Solution:
    """Per-route 2-opt and segment-reinsertion descent to a local optimum.

    Node sets are unchanged and durations never increase; asymmetric
    travel is handled by full re-evaluation of each candidate order.
    """
    constraints = constraints or BranchingConstraints()
    new_lists = []
    for r in sol.routes:
        nodes = list(r.nodes)
        best_dur = inst.route_duration(nodes)
        improved = True
        while improved and len(nodes) >= 2:
            improved = False
            L = len(nodes)
            # 2-opt: reverse a slice.
            for i in range(L - 1):
                for j in range(i + 1, L):
                    cand = nodes[:i] + nodes[i : j + 1][::-1] + nodes[j + 1 :]
                    dur = inst.route_duration(cand)
                    if dur < best_dur - 1e-9 and constraints.route_complies(cand):
                        nodes, best_dur, improved = cand, dur, True
            # Segment reinsertion (lengths 1..3).
            for seg in (1, 2, 3):
                if seg >= len(nodes):
                    continue
                for i in range(len(nodes) - seg + 1):
                    segment = nodes[i : i + seg]
                    rest = nodes[:i] + nodes[i + seg :]
                    for p in range(len(rest) + 1):
                        if p == i:
                            continue
                        cand = rest[:p] + segment + rest[p:]
                        dur = inst.route_duration(cand)
                        if dur < best_dur - 1e-9 and constraints.route_complies(cand):
                            nodes, best_dur, improved = cand, dur, True
                            break
                    if improved:
                        break
                if improved:
                    break
        new_lists.append(nodes)
    return _solution_from_partition(inst, new_lists)


class _TabuState:
    """Mutable route set with stable per-route identity tokens."""

    def __init__(self, inst: Instance, node_lists):
        self.inst = inst
        self.tokens = list(range(len(node_lists)))
        self.node_lists = [list(r) for r in node_lists]
        self.next_token = len(node_lists)

    def copy(self):
        out = _TabuState(self.inst, self.node_lists)
        out.tokens = list(self.tokens)
        out.next_token = self.next_token
        return out

    def durations(self):
        return [self.inst.route_duration(r) for r in self.node_lists]

    def route_of(self, node: int) -> int:
        for k, r in enumerate(self.node_lists):
            if node in r:
                return k
        raise KeyError(node)

    def apply_relocation(self, node: int, target_token: int, pos: int):
        src = self.route_of(node)
        self.node_lists[src].remove(node)
        if not self.node_lists[src]:
            del self.node_lists[src]
            del self.tokens[src]
        if target_token == NEW_ROUTE:
            self.node_lists.append([node])
            self.tokens.append(self.next_token)
            self.next_token += 1
        else:
            k = self.tokens.index(target_token)
            self.node_lists[k].insert(pos, node)


def tabu_search(
    inst: Instance,
    initial: Solution,
    cfg: TabuConfig | None = None,
    constraints: BranchingConstraints | None = None,
    seed: int = 0,
    gamma_over_theta: float = 1e-6,
    epsilon: float | None = None,
) -> list[Solution]:
    """Relocation-based tabu search returning improving feasible solutions.

    Moves are keyed by (node, destination-route token); a tabu move is
    still taken when it beats the best or best-feasible fitness seen so
    far. Terminates after ``it_no`` consecutive non-improving iterations.
    Deterministic for a fixed seed.
    """
    constraints = constraints or BranchingConstraints()
    cfg = cfg or TabuConfig.default_for(inst)
    epsilon = inst.epsilon if epsilon is None else float(epsilon)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x7AB0]))
    t = inst.travel_array

    # Symmetrized nearness for the insertion pruning.
    near: dict[int, list[int]] = {}
    for i in inst.shelters():
        others = sorted(
            (v for v in inst.shelters() if v != i),
            key=lambda v: (t[i][v] + t[v][i], v),
        )
        near[i] = others[: cfg.n_near]

    state = _TabuState(inst, [list(r.nodes) for r in initial.routes])

    def fitness_of(node_lists):
        durs = [inst.route_duration(r) for r in node_lists]
        fb = route_fitness(inst, node_lists, durs, cfg, gamma_over_theta, epsilon)
        return fb, durs

    fb_in, durs_in = fitness_of(state.node_lists)
    f_incumbent = fb_in.total
    f_best = f_incumbent
    feasible_found: list[Solution] = []
    f_best_feasible = math.inf
    if _routes_feasible(inst, durs_in, len(state.node_lists), epsilon):
        f_best_feasible = f_incumbent
        feasible_found.append(_solution_from_partition(inst, state.node_lists))

    tabu: dict[tuple[int, int], int] = {}
    iteration = 0
    stall = 0
    while stall <= cfg.it_no:
        iteration += 1
        shelters = np.arange(1, inst.n + 1)
        sample = rng.choice(shelters, size=min(cfg.eta, inst.n), replace=False)
        candidates = []
        for node in sorted(int(v) for v in sample):
            src = state.route_of(node)
            src_token = state.tokens[src]
            # A fresh route is a candidate destination while the fleet has
            # spare vehicles (the savings start may under-use it badly).
            targets = list(enumerate(state.node_lists))
            tokens_here = [state.tokens[k] for k, _ in targets]
            if len(state.node_lists) < inst.m:
                targets.append((-1, None))
                tokens_here.append(NEW_ROUTE)
            for (k, target), token in zip(targets, tokens_here):
                if token == src_token:
                    continue
                if token != NEW_ROUTE and not any(u in near[node] for u in target):
                    continue
                # Positions adjacent to a near neighbor only.
                positions = set()
                if token != NEW_ROUTE:
                    for idx, u in enumerate(target):
                        if u in near[node]:
                            positions.add(idx)
                            positions.add(idx + 1)
                src_nodes = state.node_lists[src]
                idx_src = src_nodes.index(node)
                before = src_nodes[idx_src - 1] if idx_src > 0 else 0
                after = src_nodes[idx_src + 1] if idx_src + 1 < len(src_nodes) else 0
                if before != after and constraints.is_forbidden(before, after):
                    continue  # removal would join a forbidden pair
                if token == NEW_ROUTE:
                    if constraints.is_forbidden(0, node) or len(src_nodes) == 1:
                        continue
                    trial = [list(r) for r in state.node_lists]
                    trial[src] = [u for u in trial[src] if u != node]
                    lists = [r for r in trial if r] + [[node]]
                    fb, durs = fitness_of(lists)
                    feas = _routes_feasible(inst, durs, len(lists), epsilon)
                    key = (node, NEW_ROUTE)
                    expiry = tabu.get(key, -1)
                    allowed = expiry < iteration
                    if not allowed and (
                        fb.total < f_best - 1e-12
                        or (feas and fb.total < f_best_feasible - 1e-12)
                    ):
                        allowed = True
                    if allowed:
                        candidates.append(
                            (fb.total, node, NEW_ROUTE, 0, lists, fb, durs, feas)
                        )
                    continue
                best_local = None
                for pos in sorted(positions):
                    trial = [list(r) for r in state.node_lists]
                    trial[src] = [u for u in trial[src] if u != node]
                    trial[k] = target[:pos] + [node] + target[pos:]
                    lists = [r for r in trial if r]
                    prev = target[pos - 1] if pos > 0 else 0
                    nxt = target[pos] if pos < len(target) else 0
                    if constraints.is_forbidden(prev, node) or constraints.is_forbidden(node, nxt):
                        continue
                    fb, durs = fitness_of(lists)
                    entry = (fb.total, pos, lists, fb, durs)
                    if best_local is None or entry[:2] < best_local[:2]:
                        best_local = entry
                if best_local is None:
                    continue
                total, pos, lists, fb, durs = best_local
                feas = _routes_feasible(inst, durs, len(lists), epsilon)
                key = (node, token)
                expiry = tabu.get(key, -1)
                allowed = expiry < iteration
                if not allowed:
                    if total < f_best - 1e-12 or (feas and total < f_best_feasible - 1e-12):
                        allowed = True  # aspiration
                if allowed:
                    candidates.append((total, node, token, pos, lists, fb, durs, feas))

        if not candidates:
            stall += 1
            continue
        candidates.sort(key=lambda c: (c[0], c[1], c[2], c[3]))
        total, node, token, pos, lists, fb, durs, feas = candidates[0]
        if total < f_best - 1e-12:
            f_best = total
        feas_cands = [c for c in candidates if c[7]]
        if feas_cands and feas_cands[0][0] < f_best_feasible - 1e-12:
            f_best_feasible = feas_cands[0][0]
            feasible_found.append(_solution_from_partition(inst, feas_cands[0][4]))
        if total <= f_incumbent + 1e-12:
            improved = total < f_incumbent - 1e-12
            state.apply_relocation(node, token, pos)  # keeps route tokens stable
            f_incumbent = total
            # Plateau moves are taken but only strict gains reset the
            # stall counter, otherwise equal-fitness cycles never stop.
            stall = 0 if improved else stall + 1
            tenure = int(rng.integers(cfg.tenure_min, cfg.tenure_max + 1))
            tabu[(node, token)] = iteration + tenure
        else:
            stall += 1
        tabu = {k: v for k, v in tabu.items() if v >= iteration}

    # Post-optimization: shorten each feasible solution's routes.
    out = []
    seen = set()
    for sol in feasible_found:
        improved = improve_routes(inst, sol, constraints)
        durs = [r.duration for r in improved.routes]
        if not _routes_feasible(inst, durs, len(improved.routes), epsilon):
            improved = sol
        key = tuple(sorted(r.nodes for r in improved.routes))
        if key not in seen:
            seen.add(key)
            out.append(improved)
    return out
