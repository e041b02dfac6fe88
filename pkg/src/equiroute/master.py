"""Restricted master problem over route-delivery columns.

Variable layout keeps fixed blocks first (pairwise linearization variables,
then one artificial cover variable per shelter) so that appending columns
never shifts existing indices and simplex bases stay warm-startable across
column-generation iterations. Row order: n^2 pairwise equalities, the
total-time row, n cover equalities, the fleet row, the supply row.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .branching import BranchingConstraints
from .linprog import EQ, LE, LinearProgram, LpResult, WarmStart, dump_lp_text, solve_lp
from .model import Instance, ModelError, RouteDelivery, Solution, solution_from_routes


@dataclass(frozen=True)
class DualPrices:
    """Row duals of the master, named by the constraint they price."""

    gini: np.ndarray  # (n, n); pairwise linearization equalities, free sign
    time: float  # total-time <= epsilon, <= 0
    cover: np.ndarray  # (n,); visit-exactly-once equalities, free sign
    fleet: float  # route count <= m, <= 0
    supply: float  # total delivery <= C, <= 0


class ColumnPool:
    """Deduplicated, feasibility-checked store of route-delivery columns."""

    def __init__(self, inst: Instance):
        self.inst = inst
        self._columns: list[RouteDelivery] = []
        self._index: dict[tuple, int] = {}

    def __len__(self):
        return len(self._columns)

    def __iter__(self):
        return iter(self._columns)

    @property
    def columns(self) -> list[RouteDelivery]:
        return self._columns

    def add(self, rd: RouteDelivery) -> bool:
        key = rd.key()
        if key in self._index:
            return False
        from .model import route_violations

        violations = route_violations(self.inst, rd)
        if violations:
            raise ModelError("; ".join(violations))
        self._index[key] = len(self._columns)
        self._columns.append(rd)
        return True

    def index_of(self, rd: RouteDelivery) -> int:
        return self._index[rd.key()]

    def add_solution(self, sol: Solution) -> int:
        return sum(self.add(r) for r in sol.routes)

    def filtered_indices(self, constraints: BranchingConstraints) -> list[int]:
        if constraints.empty:
            return list(range(len(self._columns)))
        return [
            k for k, rd in enumerate(self._columns) if constraints.route_complies(rd.nodes)
        ]

    def covers_all(self, indices=None) -> bool:
        seen: set[int] = set()
        cols = self._columns if indices is None else [self._columns[k] for k in indices]
        for rd in cols:
            seen.update(rd.nodes)
        return seen >= set(self.inst.shelters())


class RmpSolver:
    """Incrementally grown LP of the restricted master at one tree node."""

    def __init__(
        self,
        inst: Instance,
        epsilon: float,
        gamma: float,
        theta: float,
        mu_coeff: float = 1.0,
        tau_coeff: float | None = None,
        artificials: bool = True,
    ):
        if theta <= 0:
            raise ModelError("theta must be positive")
        self.inst = inst
        self.epsilon = float(epsilon)
        self.gamma = float(gamma)
        self.theta = float(theta)
        self.mu_coeff = float(mu_coeff)
        self.tau_coeff = inst.lam / inst.total_demand if tau_coeff is None else float(tau_coeff)
        n = inst.n
        self.n_rows = n * n + 1 + n + 1 + 1
        self.row_time = n * n
        self.row_cover = n * n + 1
        self.row_fleet = n * n + 1 + n
        self.row_supply = self.row_fleet + 1
        self.n_fixed = 2 * n * n + n  # tau+, tau-, artificials
        self.artificial_cost = 0.0
        self.columns: list[RouteDelivery] = []

        cap = self.n_fixed + 64
        self._A = np.zeros((self.n_rows, cap))
        self._c = np.zeros(cap)
        self._lo = np.zeros(cap)
        self._hi = np.full(cap, np.inf)
        self._used = self.n_fixed

        d = inst.demand_array
        for i in range(n):
            for j in range(n):
                row = i * n + j
                self._A[row, i * n + j] = 1.0  # tau+
                self._A[row, n * n + i * n + j] = -1.0  # tau-
        self._c[: 2 * n * n] = self.tau_coeff
        art0 = 2 * n * n
        # Covering a shelter artificially must never pay off: uncovering
        # shelter i changes the objective by at most ~2 d_i (mu term plus
        # the lambda-weighted pairwise terms), so 10(1+D) strictly
        # dominates while keeping the LP numerically well scaled.
        big = 10.0 * (1.0 + inst.total_demand) * max(1.0, abs(mu_coeff))
        self.artificial_cost = big
        for i in range(n):
            self._A[self.row_cover + i, art0 + i] = 1.0
            self._c[art0 + i] = big
            if not artificials:
                self._hi[art0 + i] = 0.0

        self.senses = np.full(self.n_rows, EQ)
        self.senses[self.row_time] = LE
        self.senses[self.row_fleet] = LE
        self.senses[self.row_supply] = LE
        self.rhs = np.zeros(self.n_rows)
        self.rhs[self.row_time] = self.epsilon
        self.rhs[self.row_cover : self.row_cover + n] = 1.0
        self.rhs[self.row_fleet] = inst.m
        self.rhs[self.row_supply] = inst.C

    @property
    def offset(self) -> float:
        """Constant objective part: mu_coeff * D - gamma * epsilon / theta."""
        return self.mu_coeff * self.inst.total_demand - self.gamma * self.epsilon / self.theta

    def column_vector(self, rd: RouteDelivery) -> np.ndarray:
        inst = self.inst
        n = inst.n
        d = inst.demand_array
        q = rd.q_vector(n)
        col = np.zeros(self.n_rows)
        col[: n * n] = -(d[:, None] * q[None, :] - q[:, None] * d[None, :]).ravel()
        col[self.row_time] = rd.duration
        for v in rd.nodes:
            col[self.row_cover + v - 1] = 1.0
        col[self.row_fleet] = 1.0
        col[self.row_supply] = rd.delivery_total
        return col

    def column_cost(self, rd: RouteDelivery) -> float:
        return -self.mu_coeff * rd.delivery_total + self.gamma / self.theta * rd.duration

    def add_column(self, rd: RouteDelivery) -> int:
        if self._used == self._A.shape[1]:
            grow = max(64, self._A.shape[1] // 2)
            self._A = np.hstack([self._A, np.zeros((self.n_rows, grow))])
            self._c = np.append(self._c, np.zeros(grow))
            self._lo = np.append(self._lo, np.zeros(grow))
            self._hi = np.append(self._hi, np.full(grow, np.inf))
        k = self._used
        self._A[:, k] = self.column_vector(rd)
        self._c[k] = self.column_cost(rd)
        self._lo[k] = 0.0
        # y <= 1 is implied by the cover equalities (every column visits a
        # shelter). An explicit bound can park a column nonbasic-at-upper
        # with negative reduced cost at degenerate optima, which would make
        # pricing re-propose pool columns forever.
        self._hi[k] = np.inf
        self._used += 1
        self.columns.append(rd)
        return k

    def set_column_bounds(self, index: int, lo: float, hi: float) -> None:
        k = self.n_fixed + index
        self._lo[k] = lo
        self._hi[k] = hi

    def linear_program(self) -> LinearProgram:
        u = self._used
        return LinearProgram(
            self._c[:u].copy(),
            self._A[:, :u].copy(),
            self.senses.copy(),
            self.rhs.copy(),
            self._lo[:u].copy(),
            self._hi[:u].copy(),
        )

    def solve(self, warm: WarmStart | None = None) -> tuple[LpResult, DualPrices | None]:
        res = solve_lp(self.linear_program(), warm=warm)
        if res.status != "optimal":
            return res, None
        return res, self.dual_prices(res)

    def dual_prices(self, res: LpResult) -> DualPrices:
        n = self.inst.n
        y = res.duals
        return DualPrices(
            gini=y[: n * n].reshape(n, n).copy(),
            time=float(y[self.row_time]),
            cover=y[self.row_cover : self.row_cover + n].copy(),
            fleet=float(y[self.row_fleet]),
            supply=float(y[self.row_supply]),
        )

    def y_values(self, res: LpResult) -> np.ndarray:
        return res.x[self.n_fixed : self._used]

    def artificial_mass(self, res: LpResult) -> float:
        n = self.inst.n
        return float(res.x[2 * n * n : 2 * n * n + n].sum())


def build_rmp(
    inst: Instance,
    pool,
    epsilon: float,
    gamma: float,
    theta: float,
    mu_coeff: float = 1.0,
    tau_coeff: float | None = None,
    artificials: bool = False,
) -> LinearProgram:
    """LP of the restricted master over the given columns."""
    solver = RmpSolver(inst, epsilon, gamma, theta, mu_coeff, tau_coeff, artificials)
    for rd in pool:
        solver.add_column(rd)
    return solver.linear_program()


def solve_rmp(
    inst: Instance,
    pool,
    epsilon: float,
    gamma: float,
    theta: float,
    mu_coeff: float = 1.0,
    tau_coeff: float | None = None,
) -> tuple[LpResult, DualPrices | None, float]:
    """Solve the RMP; returns (LP result, duals, objective incl. constant offset)."""
    solver = RmpSolver(inst, epsilon, gamma, theta, mu_coeff, tau_coeff, artificials=False)
    for rd in pool:
        solver.add_column(rd)
    res, duals = solver.solve()
    bound = res.objective + solver.offset if res.status == "optimal" else float("nan")
    return res, duals, bound


def dump_rmp(inst: Instance, pool, epsilon, gamma, theta, path) -> None:
    lp = build_rmp(inst, pool, epsilon, gamma, theta)
    n = inst.n
    names = (
        [f"tp_{i}_{j}" for i in range(n) for j in range(n)]
        + [f"tm_{i}_{j}" for i in range(n) for j in range(n)]
        + [f"art_{i}" for i in range(n)]
        + [f"y{k}" for k in range(len(lp.c) - (2 * n * n + n))]
    )
    with open(path, "w") as fh:
        fh.write(dump_lp_text(lp, names))


def solve_restricted_integer_master(
    inst: Instance,
    pool,
    epsilon: float,
    gamma: float,
    theta: float,
    time_limit: float | None = None,
    mu_coeff: float = 1.0,
    tau_coeff: float | None = None,
    incumbent_value: float = float("inf"),
    node_limit: int = 20000,
) -> Solution | None:
    """Best integral column selection via depth-first branch and bound.

    Exact over the given pool subject to the node/time limits; returns the
    best solution found or None when no integral cover exists.
    """
    import time as _time

    columns = list(pool)
    if not columns:
        return None
    solver = RmpSolver(inst, epsilon, gamma, theta, mu_coeff, tau_coeff, artificials=False)
    for rd in columns:
        solver.add_column(rd)

    start = _time.monotonic()
    best_value = incumbent_value
    best_choice: list[int] | None = None
    stack: list[tuple[dict[int, int], object]] = [({}, None)]
    nodes = 0
    while stack:
        if node_limit and nodes >= node_limit:
            break
        if time_limit is not None and _time.monotonic() - start > time_limit:
            break
        fixed, warm = stack.pop()
        nodes += 1
        for k in range(len(columns)):
            lo, hi = (1.0, 1.0) if fixed.get(k) == 1 else (0.0, 0.0) if fixed.get(k) == 0 else (0.0, 1.0)
            solver.set_column_bounds(k, lo, hi)
        res, _ = solver.solve(warm=warm)
        if res.status != "optimal":
            continue
        value = res.objective + solver.offset
        if value >= best_value - 1e-9:
            continue
        y = solver.y_values(res)
        frac = np.abs(y - np.round(y))
        j = int(np.argmax(frac))
        if frac[j] <= 1e-6:
            chosen = [k for k in range(len(columns)) if round(y[k]) == 1]
            best_value = value
            best_choice = chosen
            continue
        zero = dict(fixed)
        zero[j] = 0
        one = dict(fixed)
        one[j] = 1
        stack.append((zero, res.warm))
        stack.append((one, res.warm))  # explore the rounding-up branch first

    if best_choice is None:
        return None
    return solution_from_routes(inst, [columns[k] for k in best_choice])
