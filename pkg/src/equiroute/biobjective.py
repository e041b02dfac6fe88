"""Pareto-front generation by the augmented bound-sweep method.

The inequity objective is minimized while total travel time is capped;
the cap starts at the travel time of the unconstrained inequity optimum
and steps down past each solution's own travel time (bypass), so every
solved subproblem can contribute a new efficient point. The tiny slack
reward in the solver already breaks inequity ties toward faster plans.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import bnp
from .model import Instance, ModelError, Solution

DEFAULT_POINT_BUDGET = 600.0


@dataclass(frozen=True)
class ParetoPoint:
    solution: Solution
    f1: float  # demand-scaled inequity objective
    f2: float  # total travel time
    epsilon: float  # bound active when the point was solved
    solved_to_target: bool  # False when the per-point budget cut the solve short


def compute_theta(
    inst: Instance,
    gamma: float = 1e-4,
    seed: int = 0,
    time_budget: float = DEFAULT_POINT_BUDGET,
) -> tuple[float, float, float]:
    """(f2_min, f2_max, theta): travel-time range used to scale the slack.

    f2_min comes from the column-generation LP relaxation of the pure
    travel-time problem; f2_max is the travel time of the inequity-optimal
    solution under a non-binding cap. Degenerate ranges fall back to
    max(1, f2_max).
    """
    f2_min, x1, _flag = _inequity_anchor(inst, gamma, seed, time_budget)
    f2_max = x1.f_total_time if x1 is not None else inst.m * inst.psi
    theta = f2_max - f2_min
    if theta <= 0:
        theta = max(1.0, f2_max)
    return f2_min, f2_max, theta


def _inequity_anchor(inst, gamma, seed, time_budget):
    """Travel-time LP minimum plus the inequity-optimal solution."""
    f2_min = bnp.min_total_time_bound(inst)
    if f2_min is None:
        raise ModelError("no feasible cover exists within Psi")
    provisional = max(1.0, inst.m * inst.psi - f2_min)
    rep = bnp.solve(
        inst,
        epsilon=inst.m * inst.psi,  # non-binding: any route set fits m * Psi
        gamma=gamma,
        theta=provisional,
        limits=bnp.SolveLimits(time_limit=time_budget, seed=seed),
    )
    if rep.best is None:
        return f2_min, None, False
    return f2_min, rep.best, rep.status == "optimal"


def pareto_front(
    inst: Instance,
    solver: str = "bnp",
    point_budget: float = DEFAULT_POINT_BUDGET,
    delta: float = 1.0,
    gamma: float = 1e-4,
    seed: int = 0,
    gap_target: float = bnp.GAP_TARGET,
    stats_out: dict | None = None,
) -> list[ParetoPoint]:
    """Sweep the travel-time cap downward and keep the non-dominated points.

    ``solver`` selects the branch-and-price path or, for tiny instances,
    the exhaustive oracle. The returned list has strictly decreasing f2 and
    is mutually non-dominated. ``stats_out``, when given, receives the
    solved-subproblem and non-dominated counts.
    """
    if solver not in ("bnp", "oracle"):
        raise ValueError(f"unknown solver {solver!r}")
    f2_min, anchor, solved = _inequity_anchor(inst, gamma, seed, point_budget)
    if anchor is None:
        return []
    theta = anchor.f_total_time - f2_min
    if theta <= 0:
        theta = max(1.0, anchor.f_total_time)

    raw: list[ParetoPoint] = [
        ParetoPoint(anchor, anchor.f_iaaf, anchor.f_total_time, anchor.f_total_time, solved)
    ]
    epsilon = min(anchor.f_total_time - delta, raw[-1].f2 - delta)
    while epsilon >= f2_min - 1e-9:
        if solver == "oracle":
            sol = bnp.brute_force_solve(inst, epsilon=epsilon, gamma=gamma, theta=theta)
            point_solved = True
        else:
            rep = bnp.solve(
                inst,
                epsilon=epsilon,
                gamma=gamma,
                theta=theta,
                limits=bnp.SolveLimits(time_limit=point_budget, seed=seed),
                gap_target=gap_target,
            )
            sol = rep.best
            point_solved = rep.status == "optimal"
        if sol is None:
            break
        raw.append(ParetoPoint(sol, sol.f_iaaf, sol.f_total_time, epsilon, point_solved))
        epsilon = min(epsilon - delta, sol.f_total_time - delta)

    front = filter_nondominated(raw)
    front.sort(key=lambda p: -p.f2)
    if stats_out is not None:
        stats_out["solved"] = len(raw)
        stats_out["nondominated"] = len(front)
        stats_out["share_nondominated"] = len(front) / len(raw) if raw else 0.0
    return front


def filter_nondominated(points: list[ParetoPoint]) -> list[ParetoPoint]:
    out = []
    for p in points:
        dominated = False
        for q in points:
            if q is p:
                continue
            if q.f1 <= p.f1 + 1e-9 and q.f2 <= p.f2 + 1e-9 and (
                q.f1 < p.f1 - 1e-9 or q.f2 < p.f2 - 1e-9
            ):
                dominated = True
                break
        if not dominated:
            out.append(p)
    # Deduplicate coincident objective vectors.
    seen = set()
    unique = []
    for p in out:
        key = (round(p.f1, 9), round(p.f2, 9))
        if key not in seen:
            seen.add(key)
            unique.append(p)
    return unique


def front_rows(front: list[ParetoPoint]) -> list[dict]:
    """CSV-ready rows, one per Pareto point."""
    return [
        {
            "epsilon": p.epsilon,
            "f_iaaf": p.f1,
            "f_total_time": p.f2,
            "solved_to_target": int(p.solved_to_target),
        }
        for p in front
    ]
