"""Fairness-versus-efficiency studies across objective variants.

Three single-objective variants share the routing machinery: pure
coverage (inequity weight zero), pure dispersion (mean term dropped,
deliveries re-optimized for perfect equity), and the combined measure.
The price of fairness compares their unmet-demand totals; the trade-off
table reads a Pareto front against its fastest point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import bnp
from .allocation import RoutePartition, allocate_oracle, perfect_equity_allocation
from .biobjective import ParetoPoint
from .model import Instance, ModelError, Solution, gini_index, with_lambda

VARIANTS = ("MinUnD", "MinGini", "MinIAAF")


@dataclass(frozen=True)
class VariantResult:
    variant: str
    solution: Solution
    unmet: float  # total unsatisfied demand
    gini: float  # Gini index of unmet-demand ratios
    scaled_iaaf: float  # demand-scaled combined measure at the instance lambda


def _as_result(inst: Instance, variant: str, sol: Solution) -> VariantResult:
    from .model import evaluate_iaaf

    unmet = inst.total_demand - sum(sol.deliveries)
    return VariantResult(
        variant=variant,
        solution=sol,
        unmet=float(unmet),
        gini=gini_index(inst, sol.deliveries),
        scaled_iaaf=evaluate_iaaf(inst, sol.deliveries),
    )


def solve_variant(
    inst: Instance,
    variant: str,
    epsilon: float | None = None,
    gamma: float = 1e-4,
    theta: float | None = None,
    seed: int = 0,
    time_limit: float | None = 600.0,
    gap_target: float = bnp.GAP_TARGET,
) -> VariantResult:
    """Solve one objective variant under the shared routing constraints."""
    if variant not in VARIANTS:
        raise ModelError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    limits = bnp.SolveLimits(time_limit=time_limit, seed=seed)
    if variant == "MinUnD":
        work = with_lambda(inst, 0.0)
        rep = bnp.solve(
            work, epsilon=epsilon, gamma=gamma, theta=theta, limits=limits, gap_target=gap_target
        )
        sol = rep.best
    elif variant == "MinIAAF":
        work = with_lambda(inst, 0.5)
        rep = bnp.solve(
            work, epsilon=epsilon, gamma=gamma, theta=theta, limits=limits, gap_target=gap_target
        )
        sol = rep.best
    else:
        # Pure dispersion: the mean term leaves the master objective and
        # the delivery-level cuts (proved for the combined objective) are
        # dropped from pricing; deliveries are re-set to the maximum-
        # coverage perfect-equity allocation for the routing found.
        def dispersion_allocator(inst_, partition: RoutePartition):
            return perfect_equity_allocation(inst_, partition)

        rep = bnp.solve(
            inst,
            epsilon=epsilon,
            gamma=gamma,
            theta=theta,
            limits=limits,
            mu_coeff=0.0,
            tau_coeff=1.0 / inst.total_demand,
            disable={"validineq"},
            allocator=dispersion_allocator,
            gap_target=gap_target,
        )
        sol = rep.best
    if sol is None:
        raise ModelError(f"{variant}: no feasible solution within the limits")
    return _as_result(inst, variant, sol)


def dispersion_oracle_deliveries(inst: Instance, sol: Solution) -> Solution:
    """LP-oracle deliveries for the pure-dispersion objective on fixed routes."""
    from .model import RouteDelivery, solution_from_routes

    part = RoutePartition.from_lists([list(r.nodes) for r in sol.routes])
    alloc = allocate_oracle(inst, part, mu_coeff=0.0, gini_coeff=1.0 / inst.total_demand)
    routes = [
        RouteDelivery(r.nodes, tuple(alloc.v[v - 1] for v in r.nodes), r.duration)
        for r in sol.routes
    ]
    return solution_from_routes(inst, routes)


def price_of_fairness(
    inst: Instance,
    epsilons: list[float],
    gamma: float = 1e-4,
    seed: int = 0,
    time_limit: float | None = 600.0,
    gap_target: float = bnp.GAP_TARGET,
) -> list[dict]:
    """Percentage increase in unmet demand of each fair variant, per cap.

    The denominator is the pure-coverage optimum; a zero denominator makes
    the ratio undefined and is reported as None.
    """
    rows = []
    for eps in epsilons:
        results = {}
        for variant in VARIANTS:
            try:
                results[variant] = solve_variant(
                    inst, variant, epsilon=eps, gamma=gamma, seed=seed,
                    time_limit=time_limit, gap_target=gap_target,
                )
            except ModelError:
                results[variant] = None
        base = results["MinUnD"]
        row = {"epsilon": eps}
        if base is None:
            row.update({"unmet_minund": None, "pof_mingini": None, "pof_miniaaf": None,
                        "gini_minund": None, "gini_mingini": None, "gini_miniaaf": None})
            rows.append(row)
            continue
        row["unmet_minund"] = base.unmet
        row["gini_minund"] = base.gini
        for variant, key in (("MinGini", "mingini"), ("MinIAAF", "miniaaf")):
            res = results[variant]
            if res is None or base.unmet <= 1e-9:
                row[f"pof_{key}"] = None
            else:
                row[f"pof_{key}"] = (res.unmet / base.unmet - 1.0) * 100.0
            row[f"gini_{key}"] = None if res is None else res.gini
        rows.append(row)
    return rows


def tradeoff_table(front: list[ParetoPoint]) -> list[dict]:
    """Trade-off of each front point against the minimum-travel-time point.

    Rows carry the percentage travel-time increase and inequity decrease
    relative to that reference; a point is flagged favorable when the
    inequity improvement exceeds the time increase.
    """
    if not front:
        raise ModelError("empty front")
    reference = min(front, key=lambda p: (p.f2, p.f1))
    rows = []
    for p in sorted(front, key=lambda q: q.f2):
        dt = (p.f2 / reference.f2 - 1.0) * 100.0 if reference.f2 > 0 else 0.0
        if reference.f1 > 0:
            dI = (1.0 - p.f1 / reference.f1) * 100.0
        else:
            dI = 0.0
        rows.append(
            {
                "epsilon": p.epsilon,
                "f_iaaf": p.f1,
                "f_total_time": p.f2,
                "pct_time_increase": dt,
                "pct_iaaf_decrease": dI,
                "favorable": int(dI > dt),
            }
        )
    return rows
