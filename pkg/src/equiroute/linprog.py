"""Dense bounded-variable revised simplex with dual values.

Solves min c'x s.t. A x {<=,=,>=} b, lo <= x <= hi (lo finite, hi may be
+inf). Two-phase with a full artificial start, Dantzig pricing with a
Bland fallback after a degeneracy streak, explicit basis inverse with
periodic refactorization, and a final re-factored cleanup so the reported
primal/dual pair is certified to tight tolerances. Deterministic.

Dual sign convention (minimization): duals of <= rows are <= 0, of >=
rows >= 0, of = rows free; reduced costs are >= 0 at a lower bound and
<= 0 at an upper bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

LE, EQ, GE = -1, 0, 1
_SENSES = {LE: "<=", EQ: "=", GE: ">="}

RC_TOL = 1e-9
PIVOT_TOL = 1e-7  # rows below this cannot pivot; drift is caught by refresh
DEGEN_TOL = 1e-10
REFACTOR_EVERY = 120


@dataclass
class LinearProgram:
    """Dense LP data. ``senses`` entries are LE, EQ or GE."""

    c: np.ndarray
    A: np.ndarray
    senses: np.ndarray
    b: np.ndarray
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.A = np.asarray(self.A, dtype=float)
        self.senses = np.asarray(self.senses, dtype=int)
        self.b = np.asarray(self.b, dtype=float)
        self.lo = np.asarray(self.lo, dtype=float)
        self.hi = np.asarray(self.hi, dtype=float)
        m, n = self.A.shape
        if self.c.shape != (n,) or self.b.shape != (m,):
            raise ValueError("inconsistent LP dimensions")
        if self.senses.shape != (m,) or self.lo.shape != (n,) or self.hi.shape != (n,):
            raise ValueError("inconsistent LP dimensions")
        if not np.all(np.isfinite(self.c)) or not np.all(np.isfinite(self.A)):
            raise ValueError("LP coefficients must be finite")
        if not np.all(np.isfinite(self.b)) or not np.all(np.isfinite(self.lo)):
            raise ValueError("rhs and lower bounds must be finite")
        if np.any(self.lo > self.hi + 1e-12):
            raise ValueError("lower bound exceeds upper bound")
        for s in self.senses:
            if s not in (LE, EQ, GE):
                raise ValueError(f"unknown row sense {s}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.A.shape


@dataclass
class WarmStart:
    """Basis labels from a previous solve; robust to appended columns."""

    basis: list  # labels: ("x", j) or ("s", row)
    at_upper: set = field(default_factory=set)  # labels of nonbasic-at-upper vars


@dataclass
class LpResult:
    status: str  # optimal | infeasible | unbounded | numeric
    x: np.ndarray | None
    duals: np.ndarray | None
    objective: float
    iterations: int = 0
    warm: WarmStart | None = None


class _Tableau:
    """Internal standard form: Ax = b, 0 <= x <= u, rows sign-normalized."""

    def __init__(self, lp: LinearProgram):
        m, n = lp.shape
        self.lp = lp
        self.n_struct = n
        slack_rows = [i for i in range(m) if lp.senses[i] != EQ]
        self.slack_of_row = {row: n + k for k, row in enumerate(slack_rows)}
        n_slack = len(slack_rows)
        self.n_real = n + n_slack
        self.n_art = m
        N = self.n_real + m

        A = np.zeros((m, N))
        A[:, :n] = lp.A
        for row, col in self.slack_of_row.items():
            A[row, col] = 1.0 if lp.senses[row] == LE else -1.0
        b = lp.b - lp.A @ lp.lo
        self.row_sign = np.where(b < 0, -1.0, 1.0)
        A[: , : self.n_real] *= self.row_sign[:, None]
        b = b * self.row_sign
        A[:, self.n_real :] = np.eye(m)

        u = np.full(N, np.inf)
        u[:n] = lp.hi - lp.lo
        self.A = A
        self.b = b
        self.u = u
        self.m = m

    def label_of(self, j: int):
        if j < self.n_struct:
            return ("x", j)
        for row, col in self.slack_of_row.items():
            if col == j:
                return ("s", row)
        return ("a", j - self.n_real)

    def index_of(self, label):
        kind, k = label
        if kind == "x":
            return k if k < self.n_struct else None
        if kind == "s":
            return self.slack_of_row.get(k)
        return None


def solve_lp(lp: LinearProgram, warm: WarmStart | None = None, max_iter: int = 200000) -> LpResult:
    res = _solve_attempt(lp, warm, max_iter, careful=False)
    if res.status == "numeric":
        # One recovery pass: cold start, Bland pivoting, frequent refactoring.
        res = _solve_attempt(lp, None, max_iter, careful=True)
    return res


def _solve_attempt(lp: LinearProgram, warm: WarmStart | None, max_iter: int, careful: bool) -> LpResult:
    tab = _Tableau(lp)
    m, N = tab.m, tab.A.shape[1]

    vstat = np.zeros(N, dtype=np.int8)  # 0 lower, 1 upper, 2 basic
    xval = np.zeros(N)

    basis = None
    if warm is not None:
        basis = _apply_warm(tab, warm, vstat, xval)
    if basis is None:
        vstat[:] = 0
        xval[:] = 0.0
        basis = np.arange(tab.n_real, tab.n_real + m)
        vstat[basis] = 2
        xval[basis] = tab.b

    state = _State(tab, basis, vstat, xval, careful=careful)
    total_iter = 0

    if np.any(basis >= tab.n_real) or np.any(xval[basis] < -1e-9):
        # Phase 1: minimize artificial mass.
        cost1 = np.zeros(N)
        cost1[tab.n_real :] = 1.0
        status, it = state.optimize(cost1, max_iter)
        total_iter += it
        if status != "optimal":
            return LpResult("numeric", None, None, math.nan, total_iter)
        if cost1 @ state.values() > 1e-7:
            return LpResult("infeasible", None, None, math.nan, total_iter)
    # Pin artificials so they cannot re-enter or move off zero.
    state.u[tab.n_real :] = 0.0
    state.xval[tab.n_real :] = np.where(state.vstat[tab.n_real :] == 2, state.xval[tab.n_real :], 0.0)

    cost2 = np.zeros(N)
    cost2[: tab.n_struct] = lp.c
    status, it = state.optimize(cost2, max_iter)
    total_iter += it
    if status == "unbounded":
        return LpResult("unbounded", None, None, math.nan, total_iter)
    if status != "optimal":
        return LpResult("numeric", None, None, math.nan, total_iter)

    x, duals = state.extract(cost2)
    x_user = lp.lo + x[: tab.n_struct]
    # Certify before reporting: silent corruption must surface as numeric.
    viol = float(np.max(np.maximum(lp.lo - x_user, 0), initial=0.0))
    finite_hi = np.isfinite(lp.hi)
    if np.any(finite_hi):
        viol = max(viol, float(np.max(np.maximum(x_user[finite_hi] - lp.hi[finite_hi], 0), initial=0.0)))
    row_act = lp.A @ x_user
    for i, sense in enumerate(lp.senses):
        gap = row_act[i] - lp.b[i]
        if sense == LE:
            viol = max(viol, gap)
        elif sense == GE:
            viol = max(viol, -gap)
        else:
            viol = max(viol, abs(gap))
    if viol > 1e-7:
        return LpResult("numeric", None, None, math.nan, total_iter)
    objective = float(lp.c @ x_user)
    warm_out = WarmStart(
        basis=[tab.label_of(j) for j in state.basis],
        at_upper={tab.label_of(j) for j in np.nonzero(state.vstat == 1)[0] if j < tab.n_real},
    )
    return LpResult("optimal", x_user, duals, objective, total_iter, warm_out)


def _apply_warm(tab: _Tableau, warm: WarmStart, vstat, xval):
    cols = []
    for label in warm.basis:
        j = tab.index_of(label)
        if j is None:
            return None
    cols = [tab.index_of(label) for label in warm.basis]
    if len(cols) != tab.m or len(set(cols)) != tab.m:
        return None
    basis = np.array(cols, dtype=int)
    try:
        Binv = np.linalg.inv(tab.A[:, basis])
    except np.linalg.LinAlgError:
        return None
    vstat[:] = 0
    for label in warm.at_upper:
        j = tab.index_of(label)
        if j is not None and np.isfinite(tab.u[j]):
            vstat[j] = 1
    vstat[basis] = 2
    xval[:] = np.where(vstat == 1, tab.u, 0.0)
    xval[basis] = 0.0
    nonbasic_contrib = tab.A @ xval
    xb = Binv @ (tab.b - nonbasic_contrib)
    ub = tab.u[basis]
    if np.any(xb < -1e-9) or np.any(xb > ub + 1e-9):
        return None
    xval[basis] = xb
    return basis


class _State:
    def __init__(self, tab: _Tableau, basis, vstat, xval, careful: bool = False):
        self.tab = tab
        self.A = tab.A
        self.b = tab.b
        self.u = tab.u.copy()
        self.basis = basis
        self.vstat = vstat
        self.xval = xval
        self.careful = careful
        self.refactor_every = 24 if careful else REFACTOR_EVERY
        self.Binv = self._refactor()

    def _refactor(self):
        B = self.A[:, self.basis]
        try:
            return np.linalg.inv(B)
        except np.linalg.LinAlgError:
            return None

    def _recompute_xb(self):
        mask = np.ones(self.A.shape[1], dtype=bool)
        mask[self.basis] = False
        nb = np.nonzero(mask & (self.vstat == 1))[0]
        rhs = self.b.copy()
        if nb.size:
            rhs -= self.A[:, nb] @ self.u[nb]
        self.xval[mask] = np.where(self.vstat[mask] == 1, self.u[mask], 0.0)
        self.xval[self.basis] = self.Binv @ rhs

    def values(self):
        return self.xval

    def optimize(self, cost, max_iter):
        if self.Binv is None:
            return "numeric", 0
        self._recompute_xb()
        degen_streak = 0
        bland = self.careful
        since_refactor = 0
        n_total = self.A.shape[1]
        for it in range(max_iter):
            y = cost[self.basis] @ self.Binv
            rc = cost - y @ self.A
            rc[self.basis] = 0.0
            low_viol = (self.vstat == 0) & (rc < -RC_TOL)
            up_viol = (self.vstat == 1) & (rc > RC_TOL)
            cand = np.nonzero(low_viol | up_viol)[0]
            if cand.size == 0:
                # Optimality must be certified against a fresh factorization;
                # the product-form inverse may have drifted.
                if since_refactor == 0:
                    return "optimal", it
                fresh = self._refactor()
                if fresh is None:
                    return "numeric", it
                self.Binv = fresh
                self._recompute_xb()
                since_refactor = 0
                continue
            if bland:
                j = int(cand[0])
            else:
                j = int(cand[np.argmax(np.abs(rc[cand]))])
            s = 1.0 if self.vstat[j] == 0 else -1.0
            d = self.Binv @ self.A[:, j]

            # Ratio test: basic vars hitting either bound, plus a bound flip
            # of j. Values marginally outside a bound clamp to a degenerate
            # step rather than a negative one.
            xb = self.xval[self.basis]
            ub = self.u[self.basis]
            sd = s * d
            ratios = np.full(self.tab.m, np.inf)
            pos = sd > PIVOT_TOL
            neg = (sd < -PIVOT_TOL) & np.isfinite(ub)
            if np.any(pos):
                ratios[pos] = np.maximum(xb[pos], 0.0) / sd[pos]
            if np.any(neg):
                ratios[neg] = np.maximum(ub[neg] - xb[neg], 0.0) / (-sd[neg])
            leave_pos = -1
            leave_to_upper = False
            t_best = np.inf
            if ratios.size:
                t_min = ratios.min()
                if np.isfinite(t_min):
                    cand = np.nonzero(ratios <= t_min + 1e-12)[0]
                    absd = np.abs(d[cand])
                    strong = cand[absd >= absd.max() - 1e-12]
                    leave_pos = int(strong[np.argmin(self.basis[strong])])
                    leave_to_upper = bool(neg[leave_pos])
                    t_best = float(ratios[leave_pos])
            t_flip = self.u[j] if np.isfinite(self.u[j]) else np.inf

            if t_best == np.inf and t_flip == np.inf:
                return "unbounded", it

            if t_flip <= t_best:
                # Bound flip, basis unchanged.
                self.xval[j] = self.u[j] if self.vstat[j] == 0 else 0.0
                self.vstat[j] = 1 - self.vstat[j]
                self.xval[self.basis] = xb - sd * t_flip
                if t_flip < DEGEN_TOL:
                    degen_streak += 1
                else:
                    degen_streak = 0
                    bland = self.careful
            else:
                self.xval[self.basis] = xb - sd * t_best
                self.xval[j] = (0.0 if self.vstat[j] == 0 else self.u[j]) + s * t_best
                out_var = int(self.basis[leave_pos])
                self.vstat[out_var] = 1 if leave_to_upper else 0
                self.xval[out_var] = self.u[out_var] if leave_to_upper else 0.0
                self.basis[leave_pos] = j
                self.vstat[j] = 2
                # Product-form update of the basis inverse.
                piv = d[leave_pos]
                row = self.Binv[leave_pos] / piv
                self.Binv -= np.outer(d, row)
                self.Binv[leave_pos] = row
                since_refactor += 1
                if since_refactor >= self.refactor_every:
                    since_refactor = 0
                    fresh = self._refactor()
                    if fresh is None:
                        return "numeric", it
                    self.Binv = fresh
                    self._recompute_xb()
                if t_best < DEGEN_TOL:
                    degen_streak += 1
                else:
                    degen_streak = 0
                    bland = self.careful
            if degen_streak > 3 * n_total:
                bland = True
        return "numeric", max_iter

    def extract(self, cost):
        """Re-factored primal/dual extraction for certified residuals."""
        fresh = self._refactor()
        if fresh is not None:
            self.Binv = fresh
        self._recompute_xb()
        y = cost[self.basis] @ self.Binv
        duals = self.tab.row_sign * y
        return self.xval.copy(), duals


def lp_residuals(lp: LinearProgram, res: LpResult) -> dict:
    """Certification metrics for an optimal result (used by tests)."""
    assert res.status == "optimal"
    x, y = res.x, res.duals
    row_act = lp.A @ x
    primal = 0.0
    compl = 0.0
    for i, sense in enumerate(lp.senses):
        slack = lp.b[i] - row_act[i]
        if sense == LE:
            primal = max(primal, -slack)
            compl = max(compl, abs(y[i] * slack))
        elif sense == GE:
            primal = max(primal, slack)
            compl = max(compl, abs(y[i] * slack))
        else:
            primal = max(primal, abs(slack))
    primal = max(primal, float(np.max(np.maximum(lp.lo - x, 0), initial=0.0)))
    primal = max(primal, float(np.max(np.maximum(x - lp.hi, 0), initial=0.0)))

    rc = lp.c - y @ lp.A
    dual = 0.0
    for i, sense in enumerate(lp.senses):
        if sense == LE and y[i] > 0:
            dual = max(dual, y[i])
        if sense == GE and y[i] < 0:
            dual = max(dual, -y[i])
    for j in range(lp.A.shape[1]):
        at_lo = x[j] - lp.lo[j] < 1e-7
        at_hi = np.isfinite(lp.hi[j]) and lp.hi[j] - x[j] < 1e-7
        if at_lo and at_hi:
            continue  # fixed variable: reduced cost unconstrained
        if at_lo:
            dual = max(dual, -rc[j])
        elif at_hi:
            dual = max(dual, rc[j])
        else:
            dual = max(dual, abs(rc[j]))
            slack_lo = x[j] - lp.lo[j]
            slack_hi = (lp.hi[j] - x[j]) if np.isfinite(lp.hi[j]) else np.inf
            compl = max(compl, abs(rc[j]) * min(slack_lo, slack_hi))

    bound_term = 0.0
    for j in range(lp.A.shape[1]):
        if rc[j] > 0:
            bound_term += rc[j] * lp.lo[j]
        elif rc[j] < 0 and np.isfinite(lp.hi[j]):
            bound_term += rc[j] * lp.hi[j]
    gap = abs(res.objective - (float(y @ lp.b) + bound_term))
    return {"primal": float(primal), "dual": float(dual), "compl": float(compl), "gap": float(gap)}


def dump_lp_text(lp: LinearProgram, names: list[str] | None = None) -> str:
    """Plain-text LP rendering for external inspection."""
    m, n = lp.shape
    if names is None:
        names = [f"x{j}" for j in range(n)]

    def terms(coeffs):
        parts = []
        for j, a in enumerate(coeffs):
            if a == 0:
                continue
            parts.append(f"{'+' if a >= 0 else '-'} {abs(a):.12g} {names[j]}")
        return " ".join(parts) if parts else "0"

    out = ["Minimize", f" obj: {terms(lp.c)}", "Subject To"]
    for i in range(m):
        out.append(f" r{i}: {terms(lp.A[i])} {_SENSES[int(lp.senses[i])]} {lp.b[i]:.12g}")
    out.append("Bounds")
    for j in range(n):
        hi = "+inf" if not np.isfinite(lp.hi[j]) else f"{lp.hi[j]:.12g}"
        out.append(f" {lp.lo[j]:.12g} <= {names[j]} <= {hi}")
    out.append("End")
    return "\n".join(out) + "\n"
