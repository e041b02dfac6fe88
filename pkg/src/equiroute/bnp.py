"""Branch-and-price driver and the small-instance exhaustive oracle.

Best-bound tree search over undirected-edge branching. Each node seeds
feasible solutions with a constraint-aware tabu run, then runs column
generation to optimality (GRASP first, exact enumeration as the
termination certificate). Cover artificials keep every node LP feasible;
a node whose converged LP still uses artificial cover is infeasible.
Fathoming by integrality tests the aggregated undirected edge values, and
the incumbent decoded from an integral node re-optimizes orientation and
deliveries, which recovers exactly the node LP value.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .allocation import RoutePartition, allocate_optimal
from .branching import BranchingConstraints, aggregate_edge_values, edge, route_edges
from .construction import ConstructionError, TabuConfig, clarke_wright, improve_routes, tabu_search
from .linprog import EQ, LE, LinearProgram, solve_lp
from .master import ColumnPool, RmpSolver, solve_restricted_integer_master
from .model import (
    Instance,
    ModelError,
    RouteDelivery,
    Solution,
    solution_from_routes,
    solution_violations,
)
from .pricing import RC_EPS, PricingContext, price_exact, price_grasp, price_time_route

GAP_TARGET = 1e-4  # terminate below 0.01% relative gap
MAX_CG_ITER = 2000


@dataclass
class SolveLimits:
    time_limit: float | None = None
    node_limit: int | None = None
    seed: int = 0


@dataclass
class BnpNode:
    constraints: BranchingConstraints
    depth: int
    bound: float  # parent bound until CG refines it
    index: int

    def sort_key(self):
        return (self.bound, self.index)


@dataclass
class BnpReport:
    status: str  # optimal | feasible | infeasible
    best: Solution | None
    upper_bound: float
    lower_bound: float
    nodes_explored: int
    avg_columns: float
    columns_exact: int
    columns_grasp: int
    wall_time: float
    epsilon: float
    theta: float

    @property
    def gap_pct(self) -> float | None:
        if self.best is None or self.upper_bound <= 0:
            return None
        return (self.upper_bound - self.lower_bound) / self.upper_bound * 100.0


class _CgError(RuntimeError):
    pass


def select_branching_edge(edge_values: dict) -> tuple[int, int] | None:
    """Edge whose aggregated value sits closest to one half; None if integral."""
    best = None
    for e in sorted(edge_values):
        x = edge_values[e]
        if min(x - math.floor(x), math.ceil(x) - x) <= 1e-6:
            continue
        score = abs(x - 0.5)
        if best is None or score < best[0] - 1e-12:
            best = (score, e)
    return None if best is None else best[1]


def branch(node: BnpNode, e: tuple[int, int], next_index: int) -> tuple[BnpNode, BnpNode]:
    left = BnpNode(node.constraints.forbid(e), node.depth + 1, node.bound, next_index)
    right = BnpNode(node.constraints.force(e), node.depth + 1, node.bound, next_index + 1)
    return left, right


@dataclass
class _Workbench:
    """Shared state of one solve call."""

    inst: Instance
    pool: ColumnPool
    epsilon: float
    gamma: float
    theta: float
    mu_coeff: float
    tau_coeff: float | None
    alpha: float
    disable: frozenset
    seed: int
    allocator: object
    deadline: float | None
    columns_exact: int = 0
    columns_grasp: int = 0

    def out_of_time(self) -> bool:
        return self.deadline is not None and time.monotonic() > self.deadline

    def realloc(self, node_lists) -> Solution:
        part = RoutePartition.from_lists(node_lists)
        alloc = self.allocator(self.inst, part)
        routes = []
        for nodes in node_lists:
            q = tuple(alloc.v[v - 1] for v in nodes)
            routes.append(RouteDelivery(tuple(nodes), q, self.inst.route_duration(nodes)))
        return solution_from_routes(self.inst, routes)

    def objective_value(self, sol: Solution) -> float:
        """Variant objective: mu_coeff * unmet + tau_coeff * dispersion sum."""
        d = self.inst.demand_array
        v = np.asarray(sol.deliveries)
        tau = self.tau_coeff
        if tau is None:
            tau = self.inst.lam / self.inst.total_demand
        cross = float(np.abs(d[:, None] * v[None, :] - d[None, :] * v[:, None]).sum())
        return self.mu_coeff * float((d - v).sum()) + tau * cross

    def augmented(self, sol: Solution) -> float:
        return self.objective_value(sol) - self.gamma * (
            self.epsilon - sol.f_total_time
        ) / self.theta


def _seed_node_solutions(bench: _Workbench, node: BnpNode) -> list[Solution]:
    """Tabu-seeded feasible solutions honoring the node's constraints."""
    inst = bench.inst
    try:
        # Equity-aware savings at the root; plain savings when reseeding
        # branched nodes (the tabu step dominates solution quality there).
        weight = 1.0 if node.depth == 0 else 0.0
        start = clarke_wright(inst, node.constraints, equity_weight=weight)
    except ConstructionError:
        return []
    start = improve_routes(inst, start, node.constraints)
    if "tabu" in bench.disable:
        durs = [r.duration for r in start.routes]
        ok = len(start.routes) <= inst.m and sum(durs) <= bench.epsilon + 1e-9
        return [start] if ok else []
    return tabu_search(
        inst,
        start,
        TabuConfig.default_for(inst),
        node.constraints,
        seed=bench.seed * 1_000_003 + node.index,
        gamma_over_theta=bench.gamma / bench.theta,
        epsilon=bench.epsilon,
    )


def column_generation(bench: _Workbench, node: BnpNode, included: set[int], solver: RmpSolver):
    """Run CG at a node until the exact pricing certificate holds.

    Returns (bound, duals, lp_result, feasible). The bound includes the
    constant objective offset.
    """
    warm = None
    skip_grasp = "grasp" in bench.disable
    for it in range(MAX_CG_ITER):
        res, duals = solver.solve(warm)
        if res.status != "optimal":
            raise _CgError(f"RMP solve returned {res.status}")
        warm = res.warm
        ctx = PricingContext(
            bench.inst,
            duals,
            bench.gamma / bench.theta,
            constraints=node.constraints,
            alpha=bench.alpha,
            mu_coeff=bench.mu_coeff,
            use_delivery_cuts="validineq" not in bench.disable,
        )
        new_cols: list[RouteDelivery] = []
        exact_min = None
        if not skip_grasp:
            new_cols = price_grasp(
                ctx, restarts=5, seed=bench.seed * 7_000_003 + node.index * 4099 + it
            )
            bench.columns_grasp += len(new_cols)
        if not new_cols:
            exact_cols, exact_min = price_exact(ctx)
            bench.columns_exact += len(exact_cols)
            if exact_min >= -RC_EPS:
                feasible = solver.artificial_mass(res) <= 1e-6
                return res.objective + solver.offset, duals, res, feasible
            new_cols = exact_cols
        added = 0
        for rd in new_cols:
            bench.pool.add(rd)
            gk = bench.pool.index_of(rd)
            if gk not in included:
                included.add(gk)
                solver.add_column(rd)
                added += 1
        if added == 0:
            if exact_min is not None:
                # Exact pricing re-proposed pool columns: numerically stalled.
                if exact_min > -1e-5:
                    feasible = solver.artificial_mass(res) <= 1e-6
                    return res.objective + solver.offset, duals, res, feasible
                raise _CgError("column generation stalled with negative reduced cost")
            skip_grasp = True  # force the exact certificate next round
        elif "grasp" not in bench.disable:
            skip_grasp = False
        if bench.out_of_time():
            raise _CgError("time limit inside column generation")
    raise _CgError("column generation iteration cap reached")


def _decode_integral(bench: _Workbench, solver: RmpSolver, res) -> Solution | None:
    """Rebuild a solution from integral aggregated edge values, or None."""
    inst = bench.inst
    y = solver.y_values(res)
    active = [(solver.columns[k], float(y[k])) for k in range(len(y)) if y[k] > 1e-9]
    if not active:
        return None
    values = aggregate_edge_values([c for c, _ in active], [w for _, w in active], inst.n)
    for x in values.values():
        if min(x - math.floor(x), math.ceil(x) - x) > 1e-6:
            return None
    # Multiset adjacency; each shelter carries exactly two edge uses and a
    # singleton route doubles its depot edge.
    adj: dict[int, list[int]] = {v: [] for v in range(inst.n + 1)}
    for (a, b), x in values.items():
        for _ in range(round(x)):
            adj[a].append(b)
            adj[b].append(a)
    for v in adj:
        adj[v].sort()
    for v in inst.shelters():
        if len(adj[v]) != 2:
            return None

    def consume(a, b):
        adj[a].remove(b)
        adj[b].remove(a)

    node_lists = []
    while adj[0]:
        cur = adj[0][0]
        consume(0, cur)
        path = [cur]
        while True:
            if not adj[cur]:
                return None
            nxt = adj[cur][0]
            consume(cur, nxt)
            if nxt == 0:
                break
            if nxt in path:
                return None
            path.append(nxt)
            cur = nxt
        forward = inst.route_duration(path)
        backward = inst.route_duration(path[::-1])
        if backward < forward - 1e-12 or (
            abs(backward - forward) <= 1e-12 and tuple(path[::-1]) < tuple(path)
        ):
            path = path[::-1]
        node_lists.append(path)
    if any(adj[v] for v in inst.shelters()):
        return None
    if set(v for r in node_lists for v in r) != set(inst.shelters()):
        return None
    sol = bench.realloc(node_lists)
    if solution_violations(inst, sol, bench.epsilon):
        return None
    return sol


def solve(
    inst: Instance,
    epsilon: float | None = None,
    gamma: float = 1e-4,
    theta: float | None = None,
    limits: SolveLimits | None = None,
    chi: int = 2,
    alpha: float = 0.8,
    disable: frozenset | set = frozenset(),
    mu_coeff: float = 1.0,
    tau_coeff: float | None = None,
    allocator=None,
    gap_target: float = GAP_TARGET,
) -> BnpReport:
    """Branch and price to the gap target, a limit, or tree exhaustion."""
    limits = limits or SolveLimits()
    epsilon = inst.epsilon if epsilon is None else float(epsilon)
    start_time = time.monotonic()
    deadline = None if limits.time_limit is None else start_time + limits.time_limit
    if theta is None:
        theta = default_theta(inst)
    bench = _Workbench(
        inst=inst,
        pool=ColumnPool(inst),
        epsilon=epsilon,
        gamma=gamma,
        theta=theta,
        mu_coeff=mu_coeff,
        tau_coeff=tau_coeff,
        alpha=alpha,
        disable=frozenset(disable),
        seed=limits.seed,
        allocator=allocator or allocate_optimal,
        deadline=deadline,
    )

    incumbent: Solution | None = None
    incumbent_value = math.inf

    def offer(sol: Solution | None):
        nonlocal incumbent, incumbent_value
        if sol is None:
            return
        if solution_violations(inst, sol, epsilon):
            return
        value = bench.augmented(sol)
        if value < incumbent_value - 1e-12:
            incumbent, incumbent_value = sol, value

    root = BnpNode(BranchingConstraints(), 0, -math.inf, 0)
    next_index = 1
    open_nodes: list[BnpNode] = [root]
    explored = 0
    columns_per_node: list[int] = []
    pool_at_last_mip = -1
    mip_fail_streak = 0
    limit_hit = False
    gap_reached = False

    def current_lower():
        vals = [n.bound for n in open_nodes]
        vals.append(incumbent_value)
        return min(vals) if vals else incumbent_value

    def gap_closed():
        if incumbent is None:
            return False
        lb = current_lower()
        if incumbent_value - lb <= 1e-9:
            return True
        if (
            gap_target > 0
            and incumbent_value > 0
            and (incumbent_value - lb) / incumbent_value <= gap_target
        ):
            return True
        return False

    while open_nodes:
        if bench.out_of_time() or (
            limits.node_limit is not None and explored >= limits.node_limit
        ):
            limit_hit = True
            break
        open_nodes.sort(key=BnpNode.sort_key)
        node = open_nodes.pop(0)
        if node.bound >= incumbent_value - 1e-9:
            continue
        reason = node.constraints.infeasibility_reason(inst.n)
        if reason is not None:
            continue
        for sol in _seed_node_solutions(bench, node):
            offer(sol)
            offer(bench.realloc(sol.partition()))  # variant-optimal deliveries
            for r in sol.routes:
                if node.constraints.route_complies(r.nodes):
                    bench.pool.add(r)
        included = set(bench.pool.filtered_indices(node.constraints))
        solver = RmpSolver(
            inst, epsilon, gamma, theta, mu_coeff, tau_coeff, artificials=True
        )
        for k in sorted(included):
            solver.add_column(bench.pool.columns[k])
        try:
            bound, duals, res, feasible = column_generation(bench, node, included, solver)
        except _CgError:
            if bench.out_of_time():
                break
            raise
        explored += 1
        columns_per_node.append(len(included))
        node.bound = bound
        if not feasible:
            continue
        if bound >= incumbent_value - 1e-9:
            continue
        integral = _decode_integral(bench, solver, res)
        if integral is not None:
            offer(integral)
            continue
        y = solver.y_values(res)
        active = [
            (solver.columns[k], float(y[k])) for k in range(len(y)) if y[k] > 1e-9
        ]
        edge_vals = aggregate_edge_values(
            [c for c, _ in active], [w for _, w in active], inst.n
        )
        e = select_branching_edge(edge_vals)
        if e is None:
            # Aggregation integral but decode failed; should not happen.
            continue
        left, right = branch(node, e, next_index)
        next_index += 2
        open_nodes.extend([left, right])
        # Periodic integer restriction of the master for fresh upper bounds;
        # cadence backs off after consecutive non-improving runs so a stale
        # pool cannot dominate node throughput.
        cadence = chi << min(mip_fail_streak, 6)
        if chi and explored % cadence == 0 and len(bench.pool) > pool_at_last_mip:
            pool_at_last_mip = len(bench.pool)
            mip_sol = solve_restricted_integer_master(
                inst,
                bench.pool.columns,
                epsilon,
                gamma,
                theta,
                time_limit=1.0,
                mu_coeff=mu_coeff,
                tau_coeff=tau_coeff,
                incumbent_value=incumbent_value,
            )
            before = incumbent_value
            if mip_sol is not None:
                offer(bench.realloc([list(r.nodes) for r in mip_sol.routes]))
                offer(mip_sol)
            mip_fail_streak = 0 if incumbent_value < before - 1e-12 else mip_fail_streak + 1
        if gap_closed():
            gap_reached = True
            break

    exhausted = not open_nodes and not gap_reached
    if incumbent is None:
        status = "infeasible" if exhausted else "unknown"
        lower_final = math.inf if exhausted else current_lower()
    elif gap_reached or exhausted:
        status = "optimal"
        lower_final = min(current_lower(), incumbent_value)
    else:
        status = "feasible"  # stopped on a limit with an incumbent in hand
        lower_final = min(current_lower(), incumbent_value)
    wall = time.monotonic() - start_time
    return BnpReport(
        status=status,
        best=incumbent,
        upper_bound=incumbent_value if incumbent is not None else math.inf,
        lower_bound=lower_final,
        nodes_explored=explored,
        avg_columns=float(np.mean(columns_per_node)) if columns_per_node else 0.0,
        columns_exact=bench.columns_exact,
        columns_grasp=bench.columns_grasp,
        wall_time=wall,
        epsilon=epsilon,
        theta=theta,
    )


# ---------------------------------------------------------------------------
# Travel-time LP bound (used for the f2 range and the default theta)


def min_total_time_bound(
    inst: Instance, constraints: BranchingConstraints | None = None, seed: int = 0
) -> float | None:
    """CG lower bound on total travel time over cover + fleet rows.

    Returns None when no cover exists (artificial columns stay active).
    """
    constraints = constraints or BranchingConstraints()
    n = inst.n
    n_rows = n + 1
    big = 10.0 * float(inst.travel_array.max()) * (n + 1)
    cols: list[np.ndarray] = []
    costs: list[float] = []
    col_routes: list[tuple | None] = []
    for i in range(n):
        col = np.zeros(n_rows)
        col[i] = 1.0
        cols.append(col)
        costs.append(big)
        col_routes.append(None)

    seen: set[tuple] = set()

    def add_route(nodes) -> bool:
        nodes = tuple(nodes)
        if nodes in seen or not constraints.route_complies(nodes):
            return False
        seen.add(nodes)
        col = np.zeros(n_rows)
        for v in nodes:
            col[v - 1] = 1.0
        col[n] = 1.0
        cols.append(col)
        costs.append(inst.route_duration(nodes))
        col_routes.append(nodes)
        return True

    for v in inst.shelters():
        if inst.travel[0][v] + inst.travel[v][0] <= inst.psi + 1e-9:
            add_route((v,))
    t = inst.travel
    for a in range(1, n + 1):
        for b in range(1, n + 1):
            if a == b:
                continue
            if t[0][a] + t[a][b] + t[b][0] <= inst.psi + 1e-9:
                add_route((a, b))
    try:
        for r in clarke_wright(inst, constraints).routes:
            add_route(r.nodes)
    except ConstructionError:
        pass

    rhs = np.append(np.ones(n), float(inst.m))
    senses = np.append(np.full(n, EQ), [LE])
    warm = None
    for _ in range(MAX_CG_ITER):
        A = np.column_stack(cols)
        lp = LinearProgram(
            np.asarray(costs),
            A,
            senses,
            rhs,
            np.zeros(len(costs)),
            np.full(len(costs), np.inf),
        )
        res = solve_lp(lp, warm=warm)
        if res.status != "optimal":
            return None
        warm = res.warm
        cover_duals = res.duals[:n]
        fleet_dual = res.duals[n]
        new_routes, min_rc = price_time_route(inst, cover_duals, fleet_dual, constraints)
        if min_rc >= -RC_EPS:
            art = float(res.x[:n].sum())
            if art > 1e-6:
                return None
            return float(res.objective)
        added = sum(add_route(rd.nodes) for rd in new_routes)
        if not added:
            return float(res.objective)
    raise _CgError("time-bound column generation did not converge")


def default_theta(inst: Instance) -> float:
    """Conservative objective-range normalizer: m*Psi minus the LP time bound."""
    f2_min = min_total_time_bound(inst)
    if f2_min is None:
        return max(1.0, inst.m * inst.psi)
    return max(1.0, inst.m * inst.psi - f2_min)


# ---------------------------------------------------------------------------
# Exhaustive oracle for tiny instances


def best_tours_by_subset(inst: Instance) -> dict[int, tuple[float, tuple[int, ...]]]:
    """Minimum depot-anchored tour per shelter subset (bitmask keyed).

    Held-Karp over subsets; only subsets whose best tour fits Psi appear.
    """
    n = inst.n
    if n > 8:
        raise ModelError("exhaustive enumeration is limited to n <= 8")
    t = inst.travel
    f: list[dict[int, tuple[float, tuple[int, ...]]]] = [dict() for _ in range(n + 1)]
    for v in range(1, n + 1):
        f[v][1 << (v - 1)] = (t[0][v], (v,))
    for mask in range(1, 1 << n):
        for last in range(1, n + 1):
            if mask & (1 << (last - 1)) == 0 or mask not in f[last]:
                continue
            cost, order = f[last][mask]
            for nxt in range(1, n + 1):
                bit = 1 << (nxt - 1)
                if mask & bit:
                    continue
                m2 = mask | bit
                c2 = cost + t[last][nxt]
                cur = f[nxt].get(m2)
                if cur is None or c2 < cur[0] - 1e-12 or (
                    abs(c2 - cur[0]) <= 1e-12 and order + (nxt,) < cur[1]
                ):
                    f[nxt][m2] = (c2, order + (nxt,))
    best: dict[int, tuple[float, tuple[int, ...]]] = {}
    for last in range(1, n + 1):
        for mask, (cost, order) in f[last].items():
            closed = cost + t[last][0]
            cur = best.get(mask)
            if cur is None or closed < cur[0] - 1e-12 or (
                abs(closed - cur[0]) <= 1e-12 and order < cur[1]
            ):
                best[mask] = (closed, order)
    return {mask: v for mask, v in best.items() if v[0] <= inst.psi + 1e-9}


def iter_feasible_partitions(inst: Instance):
    """Yield (ordered blocks, total minimum time) over all feasible partitions."""
    tours = best_tours_by_subset(inst)
    n = inst.n
    full = (1 << n) - 1

    def rec(remaining, blocks, total):
        if remaining == 0:
            yield list(blocks), total
            return
        if len(blocks) >= inst.m:
            return
        low = remaining & (-remaining)
        sub = remaining
        while sub:
            if sub & low and sub in tours:
                cost, order = tours[sub]
                blocks.append(order)
                yield from rec(remaining & ~sub, blocks, total + cost)
                blocks.pop()
            sub = (sub - 1) & remaining

    yield from rec(full, [], 0.0)


def brute_force_solve(
    inst: Instance,
    epsilon: float | None = None,
    gamma: float = 1e-4,
    theta: float = 1.0,
    allocator=None,
) -> Solution | None:
    """Global optimum of the augmented single-epsilon problem for n <= 8."""
    epsilon = inst.epsilon if epsilon is None else float(epsilon)
    allocator = allocator or allocate_optimal
    best = None
    best_value = math.inf
    for blocks, total in iter_feasible_partitions(inst):
        if total > epsilon + 1e-9:
            continue
        part = RoutePartition.from_lists(blocks)
        alloc = allocator(inst, part)
        value = alloc.objective - gamma * (epsilon - total) / theta
        key = tuple(sorted(tuple(b) for b in blocks))
        if value < best_value - 1e-12 or (
            abs(value - best_value) <= 1e-12 and best is not None and key < best[1]
        ):
            best_value = value
            routes = []
            for nodes in blocks:
                q = tuple(alloc.v[v - 1] for v in nodes)
                routes.append(RouteDelivery(tuple(nodes), q, inst.route_duration(nodes)))
            best = (solution_from_routes(inst, routes), key)
    return None if best is None else best[0]
