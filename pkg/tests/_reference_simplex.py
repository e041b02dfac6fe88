"""Textbook two-phase full-tableau simplex, used only as a test oracle.

Independent of the package solver: dense tableau updates, Bland's rule
throughout, upper bounds expanded into explicit rows. Returns status and
optimal value only.
"""

import numpy as np

LE, EQ, GE = -1, 0, 1


def reference_solve(c, A, senses, b, lo, hi):
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float)
    senses = list(senses)
    b = np.asarray(b, dtype=float)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    m, n = A.shape

    # Shift lower bounds to zero and expand finite upper bounds into rows.
    b = b - A @ lo
    rows = [A[i].copy() for i in range(m)]
    rhs = list(b)
    sns = list(senses)
    for j in range(n):
        if np.isfinite(hi[j]):
            row = np.zeros(n)
            row[j] = 1.0
            rows.append(row)
            rhs.append(hi[j] - lo[j])
            sns.append(LE)
    A2 = np.array(rows)
    b2 = np.array(rhs)
    m2 = len(rhs)

    for i in range(m2):
        if b2[i] < 0:
            A2[i] *= -1
            b2[i] *= -1
            sns[i] = {LE: GE, GE: LE, EQ: EQ}[sns[i]]

    # Columns: structural + slack/surplus + artificials.
    cols = [A2]
    slack_idx = {}
    for i in range(m2):
        if sns[i] != EQ:
            col = np.zeros((m2, 1))
            col[i, 0] = 1.0 if sns[i] == LE else -1.0
            slack_idx[i] = n + len(slack_idx)
            cols.append(col)
    n_slack = len(slack_idx)
    art_idx = {}
    basis = [0] * m2
    for i in range(m2):
        if sns[i] == LE:
            basis[i] = slack_idx[i]
        else:
            col = np.zeros((m2, 1))
            col[i, 0] = 1.0
            art_idx[i] = n + n_slack + len(art_idx)
            cols.append(col)
            basis[i] = art_idx[i]
    T = np.hstack(cols)
    n_total = T.shape[1]
    n_art = len(art_idx)

    def run(costs):
        for _ in range(100000):
            y = costs[basis] @ Binv_rows()
            rc = costs - y @ T
            enter = -1
            for j in range(n_total):
                if j not in basis and rc[j] < -1e-9:
                    enter = j
                    break
            if enter < 0:
                return True
            d = np.linalg.solve(T[:, basis], T[:, enter])
            best_t, leave = np.inf, -1
            xb = np.linalg.solve(T[:, basis], b2)
            for i in range(m2):
                if d[i] > 1e-9:
                    t = xb[i] / d[i]
                    if t < best_t - 1e-12 or (abs(t - best_t) <= 1e-12 and (leave < 0 or basis[i] < basis[leave])):
                        best_t, leave = t, i
            if leave < 0:
                return False  # unbounded
            basis[leave] = enter
        raise RuntimeError("reference simplex iteration cap")

    def Binv_rows():
        return np.linalg.inv(T[:, basis])

    phase1 = np.zeros(n_total)
    for i in art_idx.values():
        phase1[i] = 1.0
    if n_art:
        run(phase1)
        xb = np.linalg.solve(T[:, basis], b2)
        art_mass = sum(xb[i] for i in range(m2) if basis[i] in set(art_idx.values()))
        if art_mass > 1e-7:
            return "infeasible", None

    phase2 = np.zeros(n_total)
    phase2[:n] = c
    for i in set(art_idx.values()):
        phase2[i] = 1e9  # keep artificials pinned at zero
    if not run(phase2):
        return "unbounded", None
    xb = np.linalg.solve(T[:, basis], b2)
    x = np.zeros(n_total)
    for i in range(m2):
        x[basis[i]] = xb[i]
    return "optimal", float(c @ (lo + x[:n]))
