# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled exact route enumeration kernel.

Semantic twin of ``_enum_core_py.enumerate_columns``; the two must stay in
lockstep (the twin-agreement test compares them column for column). Same
DFS, same prunings (duration, arcs, forced-edge aliveness, reduced-cost
bound, visited-set dominance), same tie rules; compiled with FP
contraction off so float results match the interpreter bit for bit.
"""

import math

import numpy as np

BACKEND = "compiled"

cdef struct SearchState:
    double min_rc
    long leaves
    long expanded
    double sum_joint_avail
    double sum_visit_avail
    double sum_kd_path
    double sum_minkd_path
    double sum_pi3_path
    double d_path
    double knap_delivery
    long mask
    int missing_partners
    int depth
    int n_best
    int max_cols
    double rc_eps
    double Q
    double C
    double D
    double psi
    double time_coeff
    double const_term
    bint deliver
    bint use_cuts
    bint has_forced
    bint any_depot_forced
    bint flat_dominance


cdef class _Workspace:
    cdef const double[:, ::1] travel
    cdef const double[::1] demands, kappa, cover
    cdef double[::1] kd, gain_joint, gain_visit, ins
    cdef const unsigned char[:, ::1] forbidden
    cdef const long[::1] forced_p1, forced_p2
    cdef const unsigned char[::1] depot_forced
    cdef unsigned char[::1] visited
    cdef long[::1] order, path, tk_order
    cdef double[::1] best_rc, best_t
    cdef double[::1] dom_table
    cdef list best_nodes
    cdef dict dominance
    cdef SearchState st
    cdef int n, n_order, n_tk


cdef inline double _cutoff(_Workspace w):
    if w.st.n_best < w.st.max_cols:
        return -w.st.rc_eps
    return w.best_rc[w.st.n_best - 1]


cdef void _record(_Workspace w, double rc, double t):
    cdef int i, pos
    w.st.leaves += 1
    if rc < w.st.min_rc:
        w.st.min_rc = rc
    if rc >= -w.st.rc_eps:
        return
    if w.st.n_best == w.st.max_cols and rc >= w.best_rc[w.st.n_best - 1]:
        return
    nodes = tuple([w.path[i] for i in range(w.st.depth)])
    key = frozenset(nodes)
    for i in range(w.st.n_best):
        if frozenset(<tuple> w.best_nodes[i]) == key:
            if rc < w.best_rc[i]:
                w.best_rc[i] = rc
                w.best_nodes[i] = nodes
                w.best_t[i] = t
                while i > 0 and (w.best_rc[i - 1] > w.best_rc[i] or (
                        w.best_rc[i - 1] == w.best_rc[i] and <tuple> w.best_nodes[i - 1] > <tuple> w.best_nodes[i])):
                    w.best_rc[i - 1], w.best_rc[i] = w.best_rc[i], w.best_rc[i - 1]
                    w.best_t[i - 1], w.best_t[i] = w.best_t[i], w.best_t[i - 1]
                    w.best_nodes[i - 1], w.best_nodes[i] = w.best_nodes[i], w.best_nodes[i - 1]
                    i -= 1
            return
    pos = w.st.n_best
    if w.st.n_best < w.st.max_cols:
        w.st.n_best += 1
    else:
        pos = w.st.n_best - 1
    w.best_rc[pos] = rc
    w.best_t[pos] = t
    if pos < len(w.best_nodes):
        w.best_nodes[pos] = nodes
    else:
        w.best_nodes.append(nodes)
    i = pos
    while i > 0 and (w.best_rc[i - 1] > w.best_rc[i] or (
            w.best_rc[i - 1] == w.best_rc[i] and <tuple> w.best_nodes[i - 1] > <tuple> w.best_nodes[i])):
        w.best_rc[i - 1], w.best_rc[i] = w.best_rc[i], w.best_rc[i - 1]
        w.best_t[i - 1], w.best_t[i] = w.best_t[i], w.best_t[i - 1]
        w.best_nodes[i - 1], w.best_nodes[i] = w.best_nodes[i], w.best_nodes[i - 1]
        i -= 1


cdef double _visit_time_knapsack(_Workspace w, double budget):
    cdef double acc = 0.0
    cdef double cost, frac
    cdef int i, v
    for i in range(w.n_tk):
        v = w.tk_order[i]
        if w.visited[v]:
            continue
        cost = w.ins[v - 1]
        if cost <= 0.0:
            acc += w.gain_visit[v - 1]
            continue
        if budget <= 0.0:
            break
        frac = 1.0 if cost <= budget else budget / cost
        acc += w.gain_visit[v - 1] * frac
        budget -= cost * frac
    return acc


cdef bint _forced_push_alive(_Workspace w, int v, int last, int prev_of_last):
    cdef int a, p
    for a in range(2):
        p = w.forced_p1[v - 1] if a == 0 else w.forced_p2[v - 1]
        if p != 0 and w.visited[p] and p != last:
            return False
    if last != 0:
        if w.depot_forced[last - 1] and w.st.depth >= 2:
            return False
        for a in range(2):
            p = w.forced_p1[last - 1] if a == 0 else w.forced_p2[last - 1]
            if p != 0 and p != v and p != prev_of_last:
                return False
    return True


cdef void _rec(_Workspace w, int last, double t_path):
    cdef int oi, v, a, p, prev_of_last, first
    cdef double t2, closed, rc, t, d_path, sum_kd, time_lb, base, opt_a, opt_c, bound, cheap, limit
    cdef long key
    w.st.expanded += 1
    prev_of_last = w.path[w.st.depth - 2] if w.st.depth >= 2 else 0
    for oi in range(w.n_order):
        v = w.order[oi]
        if w.visited[v] or w.forbidden[last, v]:
            continue
        t2 = t_path + w.travel[last, v]
        closed = t2 + w.travel[v, 0]
        if closed > w.st.psi + 1e-9:
            continue
        if w.st.has_forced and not _forced_push_alive(w, v, last, prev_of_last):
            continue
        if w.st.flat_dominance:
            key = (w.st.mask | (1 << (v - 1))) * (w.n + 1) + v
            if t2 >= w.dom_table[key] - 1e-12:
                continue
            w.dom_table[key] = t2
        else:
            key = (w.st.mask | (1 << (v - 1))) * 64 + v
            if w.st.any_depot_forced:
                key = key * 64 + (w.path[0] if w.st.depth > 0 else v)
            seen = w.dominance.get(key)
            if seen is not None and t2 >= (<double> seen) - 1e-12:
                continue
            w.dominance[key] = t2

        # push
        w.visited[v] = 1
        w.path[w.st.depth] = v
        w.st.depth += 1
        w.st.mask |= 1 << (v - 1)
        w.st.sum_joint_avail -= w.gain_joint[v - 1]
        w.st.sum_visit_avail -= w.gain_visit[v - 1]
        w.st.sum_kd_path += w.kd[v - 1]
        if w.st.deliver and w.kd[v - 1] < 0.0:
            w.st.sum_minkd_path += w.kd[v - 1]
        w.st.sum_pi3_path += w.cover[v - 1]
        w.st.d_path += w.demands[v - 1]
        if w.st.has_forced:
            for a in range(2):
                p = w.forced_p1[v - 1] if a == 0 else w.forced_p2[v - 1]
                if p != 0:
                    w.st.missing_partners += -1 if w.visited[p] else 1

        if not w.forbidden[v, 0] and (not w.st.has_forced or w.st.missing_partners == 0):
            if not w.st.deliver:
                rc = closed * w.st.time_coeff + w.st.const_term - w.st.sum_pi3_path
                t = 0.0
            else:
                d_path = w.st.d_path
                sum_kd = w.st.sum_kd_path
                if w.st.use_cuts and d_path * w.st.C >= w.st.Q * w.st.D:
                    t = w.st.Q / d_path
                elif w.st.use_cuts:
                    t = (1.0 if w.st.Q / d_path > 1.0 else w.st.Q / d_path) if sum_kd < 0.0 else w.st.C / w.st.D
                else:
                    t = (1.0 if w.st.Q / d_path > 1.0 else w.st.Q / d_path) if sum_kd < 0.0 else 0.0
                rc = closed * w.st.time_coeff + w.st.const_term - w.st.sum_pi3_path + t * sum_kd
            _record(w, rc, t)

        # Admissible bound; the O(n) knapsack runs only when the O(1)
        # relaxations cannot already decide against pruning.
        limit = _cutoff(w)
        time_lb = closed * w.st.time_coeff if w.st.time_coeff >= 0.0 else w.st.psi * w.st.time_coeff
        base = time_lb + w.st.const_term - w.st.sum_pi3_path
        if not w.st.deliver:
            bound = base + w.st.sum_visit_avail
            if bound < limit:
                bound = base + _visit_time_knapsack(w, w.st.psi - closed)
        else:
            opt_a = w.st.sum_joint_avail + w.st.sum_minkd_path
            cheap = w.st.sum_visit_avail + w.st.knap_delivery
            if cheap < opt_a:
                cheap = opt_a
            bound = base + cheap
            if bound < limit:
                opt_c = _visit_time_knapsack(w, w.st.psi - closed) + w.st.knap_delivery
                bound = base + (opt_a if opt_a > opt_c else opt_c)
        if bound < limit:
            _rec(w, v, t2)

        # pop
        w.st.depth -= 1
        w.visited[v] = 0
        w.st.mask &= ~(1 << (v - 1))
        w.st.sum_joint_avail += w.gain_joint[v - 1]
        w.st.sum_visit_avail += w.gain_visit[v - 1]
        w.st.sum_kd_path -= w.kd[v - 1]
        if w.st.deliver and w.kd[v - 1] < 0.0:
            w.st.sum_minkd_path -= w.kd[v - 1]
        w.st.sum_pi3_path -= w.cover[v - 1]
        w.st.d_path -= w.demands[v - 1]
        if w.st.has_forced:
            for a in range(2):
                p = w.forced_p1[v - 1] if a == 0 else w.forced_p2[v - 1]
                if p != 0:
                    w.st.missing_partners += 1 if w.visited[p] else -1


def enumerate_columns(
    int n,
    travel,
    demands,
    double total_demand,
    double Q,
    double C,
    double psi,
    kappa,
    cover_duals,
    double const_term,
    double time_coeff,
    bint deliver,
    bint use_cuts,
    forbidden,
    forced_p1,
    forced_p2,
    depot_forced,
    bint has_forced,
    double rc_eps,
    int max_cols,
):
    cdef _Workspace w = _Workspace()
    w.travel = np.ascontiguousarray(travel, dtype=np.float64)
    w.demands = np.ascontiguousarray(demands, dtype=np.float64)
    w.kappa = np.ascontiguousarray(kappa, dtype=np.float64)
    w.cover = np.ascontiguousarray(cover_duals, dtype=np.float64)
    w.forbidden = np.ascontiguousarray(forbidden, dtype=np.uint8)
    w.forced_p1 = np.ascontiguousarray(forced_p1, dtype=np.int64)
    w.forced_p2 = np.ascontiguousarray(forced_p2, dtype=np.int64)
    w.depot_forced = np.ascontiguousarray(depot_forced, dtype=np.uint8)
    w.n = n

    routable = []
    cdef int v
    for v in range(1, n + 1):
        if w.travel[0, v] + w.travel[v, 0] <= psi + 1e-9:
            routable.append(v)
    if not routable:
        return [], math.inf, 0, 0

    kd_arr = np.zeros(n)
    gj = np.zeros(n)
    gv = np.zeros(n)
    ins = np.zeros(n)
    cdef int u, ww
    cdef double best, tuv, cand
    if time_coeff >= 0.0:
        for v in range(1, n + 1):
            best = math.inf
            for u in range(n + 1):
                if u == v:
                    continue
                tuv = w.travel[u, v]
                for ww in range(n + 1):
                    if ww == v or ww == u:
                        continue
                    cand = tuv + w.travel[v, ww] - w.travel[u, ww]
                    if cand < best:
                        best = cand
            ins[v - 1] = max(best, 0.0)
    cdef double dv, tcost
    for v in routable:
        kd_arr[v - 1] = w.kappa[v - 1] * w.demands[v - 1]
        dv = min(0.0, kd_arr[v - 1]) if deliver else 0.0
        tcost = time_coeff * ins[v - 1] if time_coeff >= 0.0 else 0.0
        gj[v - 1] = min(0.0, -w.cover[v - 1] + tcost + dv)
        gv[v - 1] = min(0.0, -w.cover[v - 1] + tcost)
    for v in range(1, n + 1):
        kd_arr[v - 1] = w.kappa[v - 1] * w.demands[v - 1]
    w.kd = kd_arr
    w.gain_joint = gj
    w.gain_visit = gv
    w.ins = ins
    order_list = sorted(routable, key=lambda q: (gj[q - 1], q))
    w.order = np.asarray(order_list, dtype=np.int64)
    w.n_order = len(order_list)

    cdef double knap_delivery = 0.0
    cdef double room, take
    if deliver:
        room = Q
        for v in sorted(routable, key=lambda q: (w.kappa[q - 1], q)):
            if w.kappa[v - 1] >= 0.0 or room <= 0.0:
                break
            take = w.demands[v - 1] if w.demands[v - 1] < room else room
            knap_delivery += w.kappa[v - 1] * take
            room -= take

    def _density(q):
        g = gv[q - 1]
        if ins[q - 1] <= 0.0:
            return -math.inf if g < 0.0 else 0.0
        return g / ins[q - 1]

    tk_list = [q for q in sorted(routable, key=lambda q: (_density(q), q)) if gv[q - 1] < 0.0]
    w.tk_order = np.asarray(tk_list, dtype=np.int64) if tk_list else np.zeros(0, dtype=np.int64)
    w.n_tk = len(tk_list)

    cdef bint any_depot = False
    if has_forced:
        for v in range(1, n + 1):
            if w.depot_forced[v - 1]:
                any_depot = True
                break

    w.visited = np.zeros(n + 1, dtype=np.uint8)
    w.path = np.zeros(n + 1, dtype=np.int64)
    w.best_rc = np.zeros(max_cols)
    w.best_t = np.zeros(max_cols)
    w.best_nodes = []
    w.dominance = {}
    w.st.flat_dominance = (not any_depot) and n <= 21
    if w.st.flat_dominance:
        w.dom_table = np.full((1 << n) * (n + 1), math.inf)
    else:
        w.dom_table = np.zeros(1)

    w.st.min_rc = math.inf
    w.st.leaves = 0
    w.st.expanded = 0
    w.st.sum_joint_avail = float(sum(gj[q - 1] for q in routable))
    w.st.sum_visit_avail = float(sum(gv[q - 1] for q in routable))
    w.st.sum_kd_path = 0.0
    w.st.sum_minkd_path = 0.0
    w.st.sum_pi3_path = 0.0
    w.st.d_path = 0.0
    w.st.knap_delivery = knap_delivery
    w.st.mask = 0
    w.st.missing_partners = 0
    w.st.depth = 0
    w.st.n_best = 0
    w.st.max_cols = max_cols
    w.st.rc_eps = rc_eps
    w.st.Q = Q
    w.st.C = C
    w.st.D = total_demand
    w.st.psi = psi
    w.st.time_coeff = time_coeff
    w.st.const_term = const_term
    w.st.deliver = deliver
    w.st.use_cuts = use_cuts
    w.st.has_forced = has_forced
    w.st.any_depot_forced = any_depot

    _rec(w, 0, 0.0)

    out = []
    cdef int i
    for i in range(w.st.n_best):
        out.append((w.best_rc[i], <tuple> w.best_nodes[i], w.best_t[i]))
    return out, w.st.min_rc, w.st.leaves, w.st.expanded
