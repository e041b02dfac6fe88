"""Pure-Python exact route enumeration kernel.

Depth-first search over ordered depot-anchored simple routes with exact
prunings: duration (closing a prefix lower-bounds every extension under
the triangle inequality), arc exclusions, incremental forced-edge
aliveness, an admissible reduced-cost bound on all extensions, and
visited-set dominance (a prefix over the same set ending at the same
node with no shorter duration cannot improve anything; the route's other
reduced-cost terms depend on the set alone). Semantically identical to
the compiled twin in ``_enum_core_cy``; keep the two in lockstep.

Every reachable prefix is scored as a candidate column before its
extensions are considered, so the top-``max_cols`` list and the reported
minimum are exact whenever the minimum is below ``-rc_eps``.
"""

from __future__ import annotations

import math

BACKEND = "python"


def enumerate_columns(
    n,
    travel,  # (n+1) x (n+1) nested lists / array
    demands,  # length n, 1-based shelters at index v-1
    total_demand,
    Q,
    C,
    psi,
    kappa,  # per-shelter delivery coefficient, index v-1
    cover_duals,  # per-shelter visit dual, index v-1
    const_term,  # constant part of the reduced cost (e.g. -fleet dual)
    time_coeff,  # multiplies route duration in the reduced cost
    deliver,  # delivery term active?
    use_cuts,  # saturated-or-band delivery structure active?
    forbidden,  # (n+1) x (n+1) 0/1, symmetric, row/col 0 = depot edge
    forced_p1,
    forced_p2,  # per-shelter forced neighbors (0 = none), index v-1
    depot_forced,  # per-shelter 0/1: must be first or last if visited
    has_forced,
    rc_eps,
    max_cols,
):
    """Return (columns, min_rc, leaves, expanded).

    ``columns`` is a list of (rc, nodes_tuple, t_mult) with rc < -rc_eps,
    sorted ascending, at most ``max_cols`` entries, exact top-k over
    distinct visit sets. ``min_rc`` is +inf when no compliant route exists
    at all; a value >= -rc_eps only certifies that no column beats the
    threshold.
    """
    routable = []
    for v in range(1, n + 1):
        if travel[0][v] + travel[v][0] <= psi + 1e-9:
            routable.append(v)
    if not routable:
        return [], math.inf, 0, 0

    kd = [kappa[v] * demands[v] for v in range(n)]
    # Cheapest insertion of a node into any tour (triangle inequality makes
    # this an admissible per-node time increment for every extension).
    ins = [0.0] * n
    if time_coeff >= 0.0:
        for v in range(1, n + 1):
            best = math.inf
            for u in range(n + 1):
                if u == v:
                    continue
                tuv = travel[u][v]
                for w in range(n + 1):
                    if w == v or w == u:
                        continue
                    cand = tuv + travel[v][w] - travel[u][w]
                    if cand < best:
                        best = cand
            ins[v - 1] = max(best, 0.0)
    gain_joint = [0.0] * n  # min(0, -pi3 + tc*ins + min(0, kappa*d))
    gain_visit = [0.0] * n  # min(0, -pi3 + tc*ins)
    for v in routable:
        dv = min(0.0, kd[v - 1]) if deliver else 0.0
        tcost = time_coeff * ins[v - 1] if time_coeff >= 0.0 else 0.0
        gain_joint[v - 1] = min(0.0, -cover_duals[v - 1] + tcost + dv)
        gain_visit[v - 1] = min(0.0, -cover_duals[v - 1] + tcost)
    order = sorted(routable, key=lambda v: (gain_joint[v - 1], v))

    sum_joint_avail = sum(gain_joint[v - 1] for v in routable)

    # Capacity-relaxed delivery floor: fractional knapsack over the most
    # negative delivery coefficients, Q units in total, d_j per node.
    knap_delivery = 0.0
    if deliver:
        room = Q
        for v in sorted(routable, key=lambda u: (kappa[u - 1], u)):
            if kappa[v - 1] >= 0.0 or room <= 0.0:
                break
            take = demands[v - 1] if demands[v - 1] < room else room
            knap_delivery += kappa[v - 1] * take
            room -= take

    # Time-budget knapsack order: visit gains per unit of insertion time,
    # most negative density first (zero-time nodes lead).
    def density(v):
        g = gain_visit[v - 1]
        if ins[v - 1] <= 0.0:
            return -math.inf if g < 0.0 else 0.0
        return g / ins[v - 1]

    tk_order = [v for v in sorted(routable, key=lambda u: (density(u), u)) if gain_visit[v - 1] < 0.0]

    any_depot_forced = has_forced and any(depot_forced[v - 1] for v in range(1, n + 1))
    sum_visit_avail = sum(gain_visit[v - 1] for v in routable)

    visited = [False] * (n + 1)
    path = []
    best = []  # (rc, nodes, t) ascending
    # Visited-set dominance store: flat when it fits, dict otherwise.
    flat_dominance = not any_depot_forced and n <= 21
    if flat_dominance:
        dom_table = [math.inf] * ((1 << n) * (n + 1))
    dominance: dict[int, float] = {}
    state = {
        "min_rc": math.inf,
        "leaves": 0,
        "expanded": 0,
        "sum_joint_avail": sum_joint_avail,
        "sum_visit_avail": sum_visit_avail,
        "sum_kd_path": 0.0,
        "sum_minkd_path": 0.0,
        "sum_pi3_path": 0.0,
        "d_path": 0.0,
        "mask": 0,
        "missing_partners": 0,
    }

    def leaf_value(closed):
        if not deliver:
            return closed * time_coeff + const_term - state["sum_pi3_path"], 0.0
        d_path = state["d_path"]
        sum_kd = state["sum_kd_path"]
        if use_cuts and d_path * C >= Q * total_demand:
            t = Q / d_path
        elif use_cuts:
            t = min(1.0, Q / d_path) if sum_kd < 0.0 else C / total_demand
        else:
            t = min(1.0, Q / d_path) if sum_kd < 0.0 else 0.0
        rc = closed * time_coeff + const_term - state["sum_pi3_path"] + t * sum_kd
        return rc, t

    def cutoff():
        if len(best) < max_cols:
            return -rc_eps
        return best[-1][0]

    def record(rc, t):
        state["leaves"] += 1
        if rc < state["min_rc"]:
            state["min_rc"] = rc
        if rc >= -rc_eps:
            return
        if len(best) == max_cols and rc >= best[-1][0]:
            return
        nodes = tuple(path)
        key = frozenset(nodes)
        for i, (other_rc, other_nodes, _t) in enumerate(best):
            if frozenset(other_nodes) == key:
                if rc < other_rc:
                    best[i] = (rc, nodes, t)
                    best.sort(key=lambda item: (item[0], item[1]))
                return
        best.append((rc, nodes, t))
        best.sort(key=lambda item: (item[0], item[1]))
        if len(best) > max_cols:
            best.pop()

    def visit_time_knapsack(budget):
        """Largest admissible negative visit mass within the time budget."""
        acc = 0.0
        for v in tk_order:
            if visited[v]:
                continue
            cost = ins[v - 1]
            if cost <= 0.0:
                acc += gain_visit[v - 1]
                continue
            if budget <= 0.0:
                break
            frac = 1.0 if cost <= budget else budget / cost
            acc += gain_visit[v - 1] * frac
            budget -= cost * frac
        return acc

    def extension_bound(closed, limit):
        """Admissible bound; the O(n) knapsack runs only when the O(1)
        relaxations cannot already decide against pruning."""
        time_lb = closed * time_coeff if time_coeff >= 0.0 else psi * time_coeff
        base = time_lb + const_term - state["sum_pi3_path"]
        if not deliver:
            if base + state["sum_visit_avail"] >= limit:
                return base + state["sum_visit_avail"]
            return base + visit_time_knapsack(psi - closed)
        opt_a = state["sum_joint_avail"] + state["sum_minkd_path"]
        cheap = max(opt_a, state["sum_visit_avail"] + knap_delivery)
        if base + cheap >= limit:
            return base + cheap
        opt_c = visit_time_knapsack(psi - closed) + knap_delivery
        return base + max(opt_a, opt_c)

    def forced_push_alive(v, last, prev_of_last):
        """Can the prefix still satisfy every forced requirement after v?

        ``last`` is the node v is appended after (0 for none) and
        ``prev_of_last`` the node before ``last``.
        """
        # v's already-visited partners must be exactly the node it follows.
        for p in (forced_p1[v - 1], forced_p2[v - 1]):
            if p != 0 and visited[p] and p != last:
                return False
        if last != 0:
            # last becomes interior: depot-edge promises break unless first.
            if depot_forced[last - 1] and len(path) >= 2:
                return False
            # last's unmet partner had to be v.
            for p in (forced_p1[last - 1], forced_p2[last - 1]):
                if p != 0 and p != v and p != prev_of_last:
                    return False
        return True

    def push(v):
        visited[v] = True
        path.append(v)
        state["mask"] |= 1 << (v - 1)
        state["sum_joint_avail"] -= gain_joint[v - 1]
        state["sum_visit_avail"] -= gain_visit[v - 1]
        state["sum_kd_path"] += kd[v - 1]
        state["sum_minkd_path"] += min(0.0, kd[v - 1]) if deliver else 0.0
        state["sum_pi3_path"] += cover_duals[v - 1]
        state["d_path"] += demands[v - 1]
        if has_forced:
            for p in (forced_p1[v - 1], forced_p2[v - 1]):
                if p != 0:
                    state["missing_partners"] += -1 if visited[p] else 1

    def pop(v):
        visited[v] = False
        path.pop()
        state["mask"] &= ~(1 << (v - 1))
        state["sum_joint_avail"] += gain_joint[v - 1]
        state["sum_visit_avail"] += gain_visit[v - 1]
        state["sum_kd_path"] -= kd[v - 1]
        state["sum_minkd_path"] -= min(0.0, kd[v - 1]) if deliver else 0.0
        state["sum_pi3_path"] -= cover_duals[v - 1]
        state["d_path"] -= demands[v - 1]
        if has_forced:
            for p in (forced_p1[v - 1], forced_p2[v - 1]):
                if p != 0:
                    state["missing_partners"] += 1 if visited[p] else -1

    def leaf_compliant(v):
        if not has_forced:
            return True
        if state["missing_partners"] != 0:
            return False
        # v's unmet partner (if any) must already be its predecessor;
        # missing_partners == 0 guarantees the partner is visited, and
        # push-time checks guarantee visited partners are adjacent.
        return True

    def rec(last, t_path):
        state["expanded"] += 1
        prev_of_last = path[-2] if len(path) >= 2 else 0
        for v in order:
            if visited[v] or forbidden[last][v]:
                continue
            t2 = t_path + travel[last][v]
            closed = t2 + travel[v][0]
            if closed > psi + 1e-9:
                continue
            if has_forced and not forced_push_alive(v, last, prev_of_last):
                continue
            # Visited-set dominance: same set, same endpoint, not shorter.
            if flat_dominance:
                key = (state["mask"] | (1 << (v - 1))) * (n + 1) + v
                if t2 >= dom_table[key] - 1e-12:
                    continue
                dom_table[key] = t2
            else:
                key = (state["mask"] | (1 << (v - 1))) * 64 + v
                if any_depot_forced:
                    key = key * 64 + (path[0] if path else v)
                seen = dominance.get(key)
                if seen is not None and t2 >= seen - 1e-12:
                    continue
                dominance[key] = t2
            push(v)
            if not forbidden[v][0] and leaf_compliant(v):
                rc, t = leaf_value(closed)
                record(rc, t)
            limit = cutoff()
            if extension_bound(closed, limit) < limit:
                rec(v, t2)
            pop(v)

    rec(0, 0.0)
    return list(best), state["min_rc"], state["leaves"], state["expanded"]
