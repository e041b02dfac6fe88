"""Core domain model for equitable relief distribution.

A single depot holds C units of a relief commodity, less than the total
demand of the n shelters it serves. A fleet of m identical vehicles of
capacity Q delivers along depot-anchored routes of duration at most Psi,
with the fleet's total travel time capped by epsilon. Solutions are judged
by total travel time and by a demand-scaled inequity-averse measure of
unsatisfied demand (mean unmet demand plus lambda times Gini's mean
absolute difference of the per-individual unmet-demand ratios).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

ABS_TOL = 1e-9

INSTANCE_TYPES = ("A", "T", "VT", "VTL")


class ModelError(ValueError):
    """Base class for domain validation failures."""


class SchemaError(ModelError):
    """A serialized object violates the JSON schema; message carries the field path."""


@dataclass(frozen=True)
class Instance:
    """Immutable problem instance.

    ``travel`` is an (n+1) x (n+1) minutes matrix, row/column 0 being the
    depot. It need not be symmetric but must satisfy the triangle
    inequality and have a zero diagonal. Shelters are indexed 1..n.
    """

    demands: tuple[float, ...]
    travel: tuple[tuple[float, ...], ...]
    m: int
    Q: float
    C: float
    psi: float
    epsilon: float
    lam: float = 0.5

    def __post_init__(self):
        n = len(self.demands)
        if n < 1:
            raise ModelError("instance needs at least one shelter")
        if len(self.travel) != n + 1 or any(len(row) != n + 1 for row in self.travel):
            raise ModelError(f"travel matrix must be {n + 1}x{n + 1}")
        if any(d <= 0 for d in self.demands):
            raise ModelError("demands must be strictly positive")
        for name in ("Q", "C", "psi", "epsilon"):
            if getattr(self, name) <= 0:
                raise ModelError(f"{name} must be positive")
        if not 0.0 <= self.lam <= 0.5:
            raise ModelError("lambda must lie in [0, 1/2] (monotonicity range)")
        if self.C >= sum(self.demands):
            raise ModelError("supply C must be scarce: C < total demand")
        if self.m < 1:
            raise ModelError("m must be at least 1")
        t = self.travel
        for i in range(n + 1):
            if t[i][i] != 0.0:
                raise ModelError(f"travel[{i}][{i}] must be 0")
            for j in range(n + 1):
                if t[i][j] < 0:
                    raise ModelError(f"travel[{i}][{j}] must be nonnegative")
                if not math.isfinite(t[i][j]):
                    raise ModelError(f"travel[{i}][{j}] must be finite")
        # Triangle inequality; tolerance absorbs float noise in user data.
        arr = np.asarray(t)
        for k in range(n + 1):
            if np.any(arr > arr[:, k, None] + arr[None, k, :] + 1e-9):
                raise ModelError(f"triangle inequality violated via node {k}")

    @property
    def n(self) -> int:
        return len(self.demands)

    @property
    def total_demand(self) -> float:
        return float(sum(self.demands))

    @cached_property
    def demand_array(self) -> np.ndarray:
        a = np.asarray(self.demands, dtype=float)
        a.flags.writeable = False
        return a

    @cached_property
    def travel_array(self) -> np.ndarray:
        a = np.asarray(self.travel, dtype=float)
        a.flags.writeable = False
        return a

    def shelters(self) -> range:
        return range(1, self.n + 1)

    def route_duration(self, nodes) -> float:
        """Depot-to-depot duration of visiting ``nodes`` in order."""
        t = self.travel
        if not nodes:
            return 0.0
        total = t[0][nodes[0]]
        for a, b in zip(nodes, nodes[1:]):
            total += t[a][b]
        return total + t[nodes[-1]][0]


@dataclass(frozen=True)
class RouteDelivery:
    """One vehicle route plus its delivery quantities.

    ``nodes`` are distinct shelter indices in visiting order (depot
    implicit at both ends); ``q`` is aligned with ``nodes``.
    """

    nodes: tuple[int, ...]
    q: tuple[float, ...]
    duration: float

    def __post_init__(self):
        if len(self.nodes) != len(self.q):
            raise ModelError("nodes and q must have equal length")
        if len(set(self.nodes)) != len(self.nodes):
            raise ModelError("route visits a shelter twice")
        if not self.nodes:
            raise ModelError("route must visit at least one shelter")

    @property
    def delivery_total(self) -> float:
        return float(sum(self.q))

    def q_vector(self, n: int) -> np.ndarray:
        v = np.zeros(n)
        for node, amount in zip(self.nodes, self.q):
            v[node - 1] = amount
        return v

    def key(self, ndigits: int = 9) -> tuple:
        """Pool deduplication key: node set, rounded deliveries, rounded duration."""
        order = sorted(range(len(self.nodes)), key=lambda k: self.nodes[k])
        return (
            tuple(self.nodes[k] for k in order),
            tuple(round(self.q[k], ndigits) for k in order),
            round(self.duration, ndigits),
        )


def make_route_delivery(inst: Instance, nodes, q) -> RouteDelivery:
    """Build a route-delivery, validating feasibility against the instance."""
    nodes = tuple(int(v) for v in nodes)
    q = tuple(float(x) for x in q)
    for v in nodes:
        if not 1 <= v <= inst.n:
            raise ModelError(f"shelter index {v} out of range")
    rd = RouteDelivery(nodes, q, inst.route_duration(nodes))
    violations = route_violations(inst, rd)
    if violations:
        raise ModelError("; ".join(violations))
    return rd


def route_violations(inst: Instance, rd: RouteDelivery) -> list[str]:
    out = []
    if rd.duration > inst.psi + ABS_TOL:
        out.append(f"route duration {rd.duration:.6g} exceeds Psi {inst.psi:.6g}")
    if rd.delivery_total > inst.Q + ABS_TOL:
        out.append(f"route load {rd.delivery_total:.6g} exceeds capacity Q {inst.Q:.6g}")
    for node, amount in zip(rd.nodes, rd.q):
        if amount < -ABS_TOL:
            out.append(f"negative delivery at shelter {node}")
        if amount > inst.demands[node - 1] + ABS_TOL:
            out.append(f"delivery at shelter {node} exceeds its demand")
    return out


@dataclass(frozen=True)
class Solution:
    """A full plan: disjoint routes covering every shelter, with objectives."""

    routes: tuple[RouteDelivery, ...]
    deliveries: tuple[float, ...]
    f_iaaf: float
    f_total_time: float

    def augmented_objective(self, epsilon: float, gamma: float, theta: float) -> float:
        return self.f_iaaf - gamma * (epsilon - self.f_total_time) / theta

    def partition(self) -> list[list[int]]:
        return [list(r.nodes) for r in self.routes]


def solution_from_routes(inst: Instance, routes) -> Solution:
    routes = tuple(routes)
    v = np.zeros(inst.n)
    for r in routes:
        for node, amount in zip(r.nodes, r.q):
            v[node - 1] += amount
    f1 = evaluate_iaaf(inst, v)
    f2 = float(sum(r.duration for r in routes))
    return Solution(routes, tuple(float(x) for x in v), f1, f2)


def solution_violations(inst: Instance, sol: Solution, epsilon: float | None = None) -> list[str]:
    """Named constraint violations; empty list means feasible."""
    out = []
    seen: set[int] = set()
    for r in sol.routes:
        out.extend(route_violations(inst, r))
        for node in r.nodes:
            if node in seen:
                out.append(f"shelter {node} visited by more than one route")
            seen.add(node)
    missing = set(inst.shelters()) - seen
    if missing:
        out.append(f"shelters not covered: {sorted(missing)}")
    if len(sol.routes) > inst.m:
        out.append(f"fleet size exceeded: {len(sol.routes)} > {inst.m}")
    if sum(sol.deliveries) > inst.C + 1e-7:
        out.append(f"total delivery {sum(sol.deliveries):.6g} exceeds supply C {inst.C:.6g}")
    cap = inst.epsilon if epsilon is None else epsilon
    if sol.f_total_time > cap + 1e-7:
        out.append(f"total travel time {sol.f_total_time:.6g} exceeds bound {cap:.6g}")
    return out


def validate_solution(inst: Instance, sol: Solution, epsilon: float | None = None) -> None:
    violations = solution_violations(inst, sol, epsilon)
    if violations:
        raise ModelError("; ".join(violations))


# ---------------------------------------------------------------------------
# Objective functions


def _check_deliveries(inst: Instance, v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (inst.n,):
        raise ModelError(f"delivery vector must have length {inst.n}")
    d = inst.demand_array
    if np.any(v < -ABS_TOL) or np.any(v > d + ABS_TOL):
        raise ModelError("deliveries must satisfy 0 <= v_i <= d_i")
    return np.clip(v, 0.0, d)


def evaluate_iaaf(inst: Instance, v) -> float:
    """Demand-scaled inequity-averse objective of a delivery vector.

    Returns sum_i (d_i - v_i) + (lambda/D) * sum_ij |d_i v_j - d_j v_i|,
    i.e. D times the mean unmet demand plus lambda times Gini's mean
    absolute difference of per-individual unmet-demand ratios. Zero iff
    demand is fully covered.
    """
    v = _check_deliveries(inst, v)
    d = inst.demand_array
    cross = np.abs(d[:, None] * v[None, :] - d[None, :] * v[:, None])
    return float(np.sum(d - v) + inst.lam / inst.total_demand * cross.sum())


def unmet_mean(inst: Instance, v) -> float:
    """Mean unmet demand per individual (the mu component)."""
    v = _check_deliveries(inst, v)
    return float(np.sum(inst.demand_array - v) / inst.total_demand)


def gini_mad(inst: Instance, v) -> float:
    """Gini's mean absolute difference of individual unmet-demand ratios."""
    v = _check_deliveries(inst, v)
    d = inst.demand_array
    cross = np.abs(d[:, None] * v[None, :] - d[None, :] * v[:, None])
    return float(cross.sum() / inst.total_demand**2)


def gini_index(inst: Instance, v) -> float:
    """Gini index of unmet demand, in [0, 1]; defined as 0 at full coverage."""
    mu = unmet_mean(inst, v)
    if mu <= 0.0:
        return 0.0
    return gini_mad(inst, v) / (2.0 * mu)


def total_time(inst: Instance, sol: Solution) -> float:
    return float(sum(r.duration for r in sol.routes))


def owa_weights(n_individuals: int, lam: float) -> np.ndarray:
    """Ordered weights representing the inequity measure on sorted costs.

    With costs sorted ascending, the measure equals sum_i w_i c_(i) where
    w_i = (2/N^2) (N/2 + lam (2i - N - 1)). All weights are strictly
    positive for 0 <= lam <= 1/2, which is what makes the measure strictly
    monotone in every individual cost.
    """
    i = np.arange(1, n_individuals + 1, dtype=float)
    return 2.0 / n_individuals**2 * (n_individuals / 2.0 + lam * (2.0 * i - n_individuals - 1.0))


# ---------------------------------------------------------------------------
# Instance generation and I/O


def generate_instance(seed: int, n: int, m: int, type_code: str) -> Instance:
    """Random instance on a 100x100 square with the standard parameter scheme.

    Travel times are ceiled Euclidean distances (integral, triangle
    inequality preserved). Psi = zeta1 * ceil(n/m) * tbar, C = 0.7 * total
    demand, Q = zeta3 * C / m, epsilon = 0.85 * m * Psi; zeta1 = 1 only for
    the VTL code, zeta3 = 1.2 / 0.5 / 0.2 / 0.2 for A / T / VT / VTL.
    """
    if type_code not in INSTANCE_TYPES:
        raise ModelError(f"unknown instance type {type_code!r}; expected one of {INSTANCE_TYPES}")
    if n < 2:
        raise ModelError("n must be at least 2")
    if m < 1:
        raise ModelError("m must be at least 1")
    rng = np.random.default_rng(np.random.SeedSequence([seed, n, m, INSTANCE_TYPES.index(type_code)]))
    coords = rng.uniform(0.0, 100.0, size=(n + 1, 2))
    demands = rng.integers(10, 101, size=n).astype(float)

    diff = coords[:, None, :] - coords[None, :, :]
    dist = np.ceil(np.hypot(diff[..., 0], diff[..., 1]))
    np.fill_diagonal(dist, 0.0)

    inner = dist[1:, 1:]
    tbar = inner.sum() / (n * (n - 1))
    zeta1 = 1.0 if type_code == "VTL" else 2.0
    zeta3 = {"A": 1.2, "T": 0.5, "VT": 0.2, "VTL": 0.2}[type_code]
    psi = zeta1 * math.ceil(n / m) * tbar
    total = float(demands.sum())
    supply = 0.7 * total
    capacity = zeta3 * supply / m
    epsilon = 0.85 * m * psi
    return Instance(
        demands=tuple(demands),
        travel=tuple(tuple(row) for row in dist),
        m=m,
        Q=capacity,
        C=supply,
        psi=psi,
        epsilon=epsilon,
        lam=0.5,
    )


def instance_to_dict(inst: Instance) -> dict:
    return {
        "n": inst.n,
        "m": inst.m,
        "Q": inst.Q,
        "C": inst.C,
        "psi": inst.psi,
        "epsilon": inst.epsilon,
        "lambda": inst.lam,
        "demands": list(inst.demands),
        "travel": [list(row) for row in inst.travel],
    }


def _expect(data: dict, key: str, kinds, path: str):
    if key not in data:
        raise SchemaError(f"{path}.{key}: missing")
    value = data[key]
    if not isinstance(value, kinds) or isinstance(value, bool):
        raise SchemaError(f"{path}.{key}: expected {kinds}, got {type(value).__name__}")
    return value


def instance_from_dict(data: dict, path: str = "instance") -> Instance:
    if not isinstance(data, dict):
        raise SchemaError(f"{path}: expected object")
    n = _expect(data, "n", int, path)
    m = _expect(data, "m", int, path)
    numbers = (int, float)
    demands = _expect(data, "demands", list, path)
    if len(demands) != n:
        raise SchemaError(f"{path}.demands: expected {n} entries, got {len(demands)}")
    for i, d in enumerate(demands):
        if not isinstance(d, numbers) or isinstance(d, bool):
            raise SchemaError(f"{path}.demands[{i}]: expected number")
    travel = _expect(data, "travel", list, path)
    if len(travel) != n + 1:
        raise SchemaError(f"{path}.travel: expected {n + 1} rows, got {len(travel)}")
    for i, row in enumerate(travel):
        if not isinstance(row, list) or len(row) != n + 1:
            raise SchemaError(f"{path}.travel[{i}]: expected row of length {n + 1}")
        for j, x in enumerate(row):
            if not isinstance(x, numbers) or isinstance(x, bool):
                raise SchemaError(f"{path}.travel[{i}][{j}]: expected number")
    try:
        return Instance(
            demands=tuple(float(d) for d in demands),
            travel=tuple(tuple(float(x) for x in row) for row in travel),
            m=m,
            Q=float(_expect(data, "Q", numbers, path)),
            C=float(_expect(data, "C", numbers, path)),
            psi=float(_expect(data, "psi", numbers, path)),
            epsilon=float(_expect(data, "epsilon", numbers, path)),
            lam=float(_expect(data, "lambda", numbers, path)),
        )
    except ModelError as exc:
        raise ModelError(f"{path}: {exc}") from exc


def save_instance(inst: Instance, path) -> None:
    with open(path, "w") as fh:
        json.dump(instance_to_dict(inst), fh, indent=1)
        fh.write("\n")


def load_instance(path) -> Instance:
    with open(path) as fh:
        return instance_from_dict(json.load(fh))


def solution_to_dict(sol: Solution) -> dict:
    return {
        "routes": [
            {"nodes": list(r.nodes), "q": list(r.q), "duration": r.duration} for r in sol.routes
        ],
        "deliveries": list(sol.deliveries),
        "f_iaaf": sol.f_iaaf,
        "f_total_time": sol.f_total_time,
    }


def solution_from_dict(inst: Instance, data: dict, path: str = "solution") -> Solution:
    if not isinstance(data, dict):
        raise SchemaError(f"{path}: expected object")
    routes_data = _expect(data, "routes", list, path)
    routes = []
    for i, rd in enumerate(routes_data):
        if not isinstance(rd, dict):
            raise SchemaError(f"{path}.routes[{i}]: expected object")
        nodes = _expect(rd, "nodes", list, f"{path}.routes[{i}]")
        q = _expect(rd, "q", list, f"{path}.routes[{i}]")
        if len(nodes) != len(q):
            raise SchemaError(f"{path}.routes[{i}]: nodes and q lengths differ")
        routes.append(
            RouteDelivery(
                tuple(int(v) for v in nodes),
                tuple(float(x) for x in q),
                inst.route_duration([int(v) for v in nodes]),
            )
        )
    return solution_from_routes(inst, routes)


def save_solution(sol: Solution, path) -> None:
    with open(path, "w") as fh:
        json.dump(solution_to_dict(sol), fh, indent=1)
        fh.write("\n")


def load_solution(inst: Instance, path) -> Solution:
    with open(path) as fh:
        return solution_from_dict(inst, json.load(fh))


def with_lambda(inst: Instance, lam: float) -> Instance:
    return replace(inst, lam=lam)
