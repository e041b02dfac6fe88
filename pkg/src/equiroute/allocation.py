"""Optimal delivery allocation for fixed routes.

Once routes are fixed, deliveries within a route can be assumed
demand-proportional, and the per-route totals xi_k solve a small convex
problem: routes whose demand share exceeds the capacity share Q/C get
saturated at Q, the rest share the remaining supply proportionally.
``allocate_optimal`` runs that fixpoint in O(K^2 + n); ``allocate_oracle``
solves the linearized LP over raw per-shelter deliveries instead and is
the independent cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linprog import EQ, GE, LE, LinearProgram, solve_lp
from .model import ABS_TOL, Instance, ModelError


@dataclass(frozen=True)
class RoutePartition:
    """Disjoint shelter sets covering all shelters, one per route."""

    node_sets: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if not self.node_sets:
            raise ModelError("partition must contain at least one route")
        seen: set[int] = set()
        for nodes in self.node_sets:
            if not nodes:
                raise ModelError("empty route in partition")
            for v in nodes:
                if v in seen:
                    raise ModelError(f"shelter {v} appears in two routes")
                seen.add(v)

    @staticmethod
    def from_lists(node_sets) -> "RoutePartition":
        return RoutePartition(tuple(tuple(sorted(int(v) for v in s)) for s in node_sets))

    def demand_totals(self, inst: Instance) -> np.ndarray:
        return np.array([sum(inst.demands[v - 1] for v in s) for s in self.node_sets])


@dataclass(frozen=True)
class AllocationResult:
    v: tuple[float, ...]  # per shelter
    xi: tuple[float, ...]  # per route total
    objective: float


def partition_objective(xi, route_demands, lam: float, total_demand: float,
                        mu_coeff: float = 1.0, gini_coeff: float | None = None) -> float:
    """Objective of a demand-proportional allocation, in route aggregates.

    Evaluates mu_coeff * (D - sum xi) + gini_coeff * sum_kl |D_l xi_k - D_k xi_l|
    with gini_coeff defaulting to lam / D. Equals the per-shelter objective
    because proportional deliveries make within-route terms vanish.
    """
    xi = np.asarray(xi, dtype=float)
    Dk = np.asarray(route_demands, dtype=float)
    if gini_coeff is None:
        gini_coeff = lam / total_demand
    cross = np.abs(Dk[None, :] * xi[:, None] - Dk[:, None] * xi[None, :])
    return float(mu_coeff * (total_demand - xi.sum()) + gini_coeff * cross.sum())


def allocate_optimal(inst: Instance, partition: RoutePartition) -> AllocationResult:
    """Exact allocation by iterative saturation of over-demanded routes.

    Routes with D_k / D' > Q / C' (strictly; ties are non-violating) are
    fixed at xi_k = Q; when no violator remains the rest share C'
    proportionally. C' is clamped to [0, D'] against float drift. The
    active set must shrink every round, which is asserted.
    """
    Dk = partition.demand_totals(inst)
    K = len(Dk)
    Q, C = inst.Q, inst.C
    xi = np.zeros(K)
    active = list(range(K))
    fixed_total = 0.0
    while active:
        D_active = float(Dk[active].sum())
        C_rem = min(max(C - fixed_total, 0.0), D_active)
        # Cross-multiplied comparison avoids dividing by a zero C_rem.
        violators = [k for k in active if Dk[k] * C_rem > Q * D_active]
        if not violators:
            ratio = C_rem / D_active
            for k in active:
                xi[k] = ratio * Dk[k]
            active = []
        else:
            for k in violators:
                xi[k] = Q
                fixed_total += Q
            remaining = [k for k in active if k not in violators]
            if len(remaining) == len(active):
                raise AssertionError("saturation loop failed to shrink the active set")
            active = remaining

    v = np.zeros(inst.n)
    for k, nodes in enumerate(partition.node_sets):
        ratio = xi[k] / Dk[k]
        for node in nodes:
            v[node - 1] = ratio * inst.demands[node - 1]
    obj = partition_objective(xi, Dk, inst.lam, inst.total_demand)
    return AllocationResult(tuple(float(x) for x in v), tuple(float(x) for x in xi), obj)


def allocate_oracle(inst: Instance, partition: RoutePartition,
                    mu_coeff: float = 1.0, gini_coeff: float | None = None) -> AllocationResult:
    """LP-based allocation over raw per-shelter deliveries (independent oracle).

    Minimizes mu_coeff * sum (d_i - v_i) + gini_coeff * sum (tau+ + tau-)
    subject to the pairwise linearization equalities, per-route capacity,
    total supply, and 0 <= v_i <= d_i.
    """
    n = inst.n
    d = inst.demand_array
    if gini_coeff is None:
        gini_coeff = inst.lam / inst.total_demand
    nv = n + 2 * n * n  # v, tau+, tau-
    tp = lambda i, j: n + i * n + j
    tm = lambda i, j: n + n * n + i * n + j

    rows = []
    senses = []
    rhs = []
    # tau+_ij - tau-_ij - (d_i v_j - d_j v_i) = 0
    for i in range(n):
        for j in range(n):
            row = np.zeros(nv)
            row[tp(i, j)] = 1.0
            row[tm(i, j)] = -1.0
            row[j] -= d[i]
            row[i] += d[j]
            rows.append(row)
            senses.append(EQ)
            rhs.append(0.0)
    for nodes in partition.node_sets:
        row = np.zeros(nv)
        for v_ in nodes:
            row[v_ - 1] = 1.0
        rows.append(row)
        senses.append(LE)
        rhs.append(inst.Q)
    row = np.zeros(nv)
    row[:n] = 1.0
    rows.append(row)
    senses.append(LE)
    rhs.append(inst.C)

    c = np.zeros(nv)
    c[:n] = -mu_coeff
    c[n:] = gini_coeff
    lo = np.zeros(nv)
    hi = np.full(nv, np.inf)
    hi[:n] = d
    lp = LinearProgram(c, np.array(rows), np.array(senses), np.array(rhs), lo, hi)
    res = solve_lp(lp)
    if res.status != "optimal":
        raise ModelError(f"allocation LP ended with status {res.status}")
    v = res.x[:n]
    xi = np.array([sum(v[node - 1] for node in nodes) for nodes in partition.node_sets])
    objective = res.objective + mu_coeff * inst.total_demand
    return AllocationResult(tuple(float(x) for x in v), tuple(float(x) for x in xi), float(objective))


def check_delivery_structure(inst: Instance, partition: RoutePartition,
                             result: AllocationResult, tol: float = 1e-9) -> bool:
    """Verify the saturated-or-proportional-band structure of an optimum.

    For each route exactly one case applies: if its demand share exceeds
    the capacity share (D_k/D > Q/C strictly), its total must equal Q and
    it falls outside the band; otherwise its total must lie in
    [(C/D) D_k, D_k].
    """
    Dk = partition.demand_totals(inst)
    D, Q, C = inst.total_demand, inst.Q, inst.C
    for k, xi in enumerate(result.xi):
        if Dk[k] * C > Q * D:
            if abs(xi - Q) > tol:
                return False
        else:
            if not (C / D * Dk[k] - tol <= xi <= Dk[k] + tol):
                return False
    return True


def perfect_equity_allocation(inst: Instance, partition: RoutePartition) -> AllocationResult:
    """Max-coverage allocation with zero dispersion: v_i = t d_i globally.

    t = min(C/D, min_k Q/D_k); every unmet-demand ratio is equal, so the
    Gini term vanishes. Used for the pure-dispersion objective variant.
    """
    Dk = partition.demand_totals(inst)
    t = min(inst.C / inst.total_demand, float(np.min(inst.Q / Dk)))
    t = max(t, 0.0)
    v = np.zeros(inst.n)
    for nodes in partition.node_sets:
        for node in nodes:
            v[node - 1] = t * inst.demands[node - 1]
    xi = t * Dk
    obj = partition_objective(xi, Dk, inst.lam, inst.total_demand, mu_coeff=0.0,
                              gini_coeff=1.0 / inst.total_demand)
    return AllocationResult(tuple(float(x) for x in v), tuple(float(x) for x in xi), obj)
