"""Command-line interface: generation, solving, allocation, studies.

Every command writes its results plus a manifest.json recording the
resolved configuration, seed, package versions and wall time. Result
files are byte-reproducible for a fixed seed and configuration; the
manifest carries the only non-reproducible fields (timing).

Exit codes: 0 success, 1 infeasible/failed solve, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__, analysis, biobjective, bnp
from .allocation import RoutePartition, allocate_optimal
from .model import (
    Instance,
    ModelError,
    SchemaError,
    generate_instance,
    load_instance,
    save_instance,
    save_solution,
    solution_from_dict,
    solution_violations,
    with_lambda,
)

STAMP = "%.12g"


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return STAMP % x
    return str(x)


def write_csv(path, rows: list[dict], columns: list[str]) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row.get(c)) for c in columns) + "\n")


def write_manifest(outdir, command, config: dict, outputs: list[str], wall: float) -> None:
    manifest = {
        "command": command,
        "config": config,
        "seed": config.get("seed"),
        "versions": {
            "equiroute": __version__,
            "python": sys.version.split()[0],
            "numpy": np.__version__,
        },
        "wall_time_s": wall,
        "outputs": outputs,
        "note": "wall_time_s is a run record and is not reproducible",
    }
    with open(os.path.join(outdir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _load(args) -> Instance:
    inst = load_instance(args.instance)
    if getattr(args, "lam", None) is not None:
        inst = with_lambda(inst, args.lam)
    return inst


def _limits(args) -> bnp.SolveLimits:
    return bnp.SolveLimits(time_limit=args.time_limit, seed=args.seed)


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epsilon", type=float, default=None, help="total travel time cap")
    p.add_argument("--gamma", type=float, default=1e-4)
    p.add_argument("--lambda", dest="lam", type=float, default=None,
                   help="inequity aversion weight (overrides the instance)")
    p.add_argument("--chi", type=int, default=2, help="integer-master cadence in tree nodes")
    p.add_argument("--alpha", type=float, default=0.8, help="restricted-candidate-list factor")
    p.add_argument("--time-limit", type=float, default=600.0)
    p.add_argument("--gap-target", type=float, default=1e-4, help="relative gap, 1e-4 = 0.01%%")
    p.add_argument("--disable", action="append", default=[],
                   choices=["grasp", "tabu", "validineq"],
                   help="switch off an algorithm component (repeatable)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--outdir", default=".")


def _report_rows(inst, rep: bnp.BnpReport) -> list[dict]:
    return [
        {
            "status": rep.status,
            "ub": rep.upper_bound if rep.best is not None else None,
            "lb": rep.lower_bound if rep.lower_bound not in (float("inf"),) else None,
            "gap_pct": rep.gap_pct,
            "nodes": rep.nodes_explored,
            "avg_columns": rep.avg_columns,
            "columns_exact": rep.columns_exact,
            "columns_grasp": rep.columns_grasp,
            "epsilon": rep.epsilon,
            "theta": rep.theta,
        }
    ]


REPORT_COLUMNS = [
    "status", "ub", "lb", "gap_pct", "nodes", "avg_columns",
    "columns_exact", "columns_grasp", "epsilon", "theta",
]


def cmd_gen(args) -> int:
    inst = generate_instance(args.seed, args.n, args.m, args.type)
    save_instance(inst, args.output)
    return 0


def cmd_solve(args) -> int:
    t0 = time.monotonic()
    inst = _load(args)
    os.makedirs(args.outdir, exist_ok=True)
    outputs = []
    if args.oracle:
        theta = args.theta if args.theta is not None else bnp.default_theta(inst)
        sol = bnp.brute_force_solve(inst, epsilon=args.epsilon, gamma=args.gamma, theta=theta)
        if sol is None:
            print("infeasible")
            write_manifest(args.outdir, "solve", vars_of(args), outputs, time.monotonic() - t0)
            return 1
        eps = inst.epsilon if args.epsilon is None else args.epsilon
        rows = [{
            "status": "optimal",
            "ub": sol.augmented_objective(eps, args.gamma, theta),
            "lb": sol.augmented_objective(eps, args.gamma, theta),
            "gap_pct": 0.0,
            "nodes": 0, "avg_columns": 0.0, "columns_exact": 0, "columns_grasp": 0,
            "epsilon": eps, "theta": theta,
        }]
        best = sol
    else:
        rep = bnp.solve(
            inst,
            epsilon=args.epsilon,
            gamma=args.gamma,
            theta=args.theta,
            limits=_limits(args),
            chi=args.chi,
            alpha=args.alpha,
            disable=set(args.disable),
            gap_target=args.gap_target,
        )
        rows = _report_rows(inst, rep)
        best = rep.best
        if best is None:
            write_csv(os.path.join(args.outdir, "report.csv"), rows, REPORT_COLUMNS)
            outputs.append("report.csv")
            write_manifest(args.outdir, "solve", vars_of(args), outputs, time.monotonic() - t0)
            print(rep.status)
            return 1
    sol_path = os.path.join(args.outdir, "solution.json")
    save_solution(best, sol_path)
    outputs.append("solution.json")
    write_csv(os.path.join(args.outdir, "report.csv"), rows, REPORT_COLUMNS)
    outputs.append("report.csv")
    write_manifest(args.outdir, "solve", vars_of(args), outputs, time.monotonic() - t0)
    print(f"{rows[0]['status']}: objective {_fmt(rows[0]['ub'])}")
    return 0


def cmd_alloc(args) -> int:
    t0 = time.monotonic()
    inst = _load(args)
    with open(args.routes) as fh:
        data = json.load(fh)
    if not isinstance(data, dict) or "routes" not in data:
        raise SchemaError("routes file: expected object with a 'routes' list")
    part = RoutePartition.from_lists(data["routes"])
    res = allocate_optimal(inst, part)
    os.makedirs(args.outdir, exist_ok=True)
    out = {
        "deliveries": list(res.v),
        "route_totals": list(res.xi),
        "objective": res.objective,
    }
    path = os.path.join(args.outdir, "allocation.json")
    with open(path, "w") as fh:
        json.dump(out, fh, indent=1)
        fh.write("\n")
    write_manifest(args.outdir, "alloc", vars_of(args), ["allocation.json"], time.monotonic() - t0)
    print(f"objective {_fmt(res.objective)}")
    return 0


def cmd_pareto(args, table: str = "front") -> int:
    t0 = time.monotonic()
    inst = _load(args)
    os.makedirs(args.outdir, exist_ok=True)
    stats: dict = {}
    front = biobjective.pareto_front(
        inst,
        solver=args.solver,
        point_budget=args.point_budget,
        delta=args.delta,
        gamma=args.gamma,
        seed=args.seed,
        stats_out=stats,
    )
    outputs = []
    if table in ("front", "both"):
        rows = biobjective.front_rows(front)
        write_csv(os.path.join(args.outdir, "front.csv"), rows,
                  ["epsilon", "f_iaaf", "f_total_time", "solved_to_target"])
        outputs.append("front.csv")
    if table in ("tradeoff", "both") and front:
        rows = analysis.tradeoff_table(front)
        write_csv(os.path.join(args.outdir, "tradeoff.csv"), rows,
                  ["epsilon", "f_iaaf", "f_total_time", "pct_time_increase",
                   "pct_iaaf_decrease", "favorable"])
        outputs.append("tradeoff.csv")
    write_manifest(args.outdir, "pareto" if table == "front" else "tradeoff",
                   {**vars_of(args), "sweep_stats": stats}, outputs, time.monotonic() - t0)
    if not front:
        print("infeasible")
        return 1
    share = stats.get("share_nondominated", 0.0)
    print(f"{len(front)} non-dominated points from {stats.get('solved', 0)} solves "
          f"({share:.0%} non-dominated)")
    return 0


def cmd_pof(args) -> int:
    t0 = time.monotonic()
    inst = _load(args)
    os.makedirs(args.outdir, exist_ok=True)
    if args.epsilons:
        eps_list = [float(x) for x in args.epsilons.split(",")]
    else:
        f2_min, f2_max, _theta = biobjective.compute_theta(inst, gamma=args.gamma, seed=args.seed)
        k = max(2, args.steps)
        eps_list = [f2_max - (f2_max - f2_min) * i / (k - 1) for i in range(k)]
    rows = analysis.price_of_fairness(
        inst, eps_list, gamma=args.gamma, seed=args.seed, time_limit=args.time_limit
    )
    write_csv(os.path.join(args.outdir, "pof.csv"), rows,
              ["epsilon", "unmet_minund", "pof_mingini", "pof_miniaaf",
               "gini_minund", "gini_mingini", "gini_miniaaf"])
    write_manifest(args.outdir, "pof", vars_of(args), ["pof.csv"], time.monotonic() - t0)
    print(f"{len(rows)} rows")
    return 0


def cmd_validate(args) -> int:
    inst = _load(args)
    with open(args.solution) as fh:
        sol = solution_from_dict(inst, json.load(fh))
    violations = solution_violations(inst, sol, args.epsilon)
    if violations:
        for v in violations:
            print(f"violation: {v}")
        return 1
    print("feasible")
    return 0


def vars_of(args) -> dict:
    skip = {"func"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="equiroute",
        description="Equitable relief-aid routing and allocation solver",
    )
    parser.add_argument("--config", default=None,
                        help="JSON file of flag defaults; explicit flags win")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic instance")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--type", required=True, choices=["A", "T", "VT", "VTL"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("solve", help="solve a single travel-time cap")
    p.add_argument("instance")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--bnp", action="store_true", default=True,
                       help="branch and price (default)")
    group.add_argument("--oracle", action="store_true",
                       help="exhaustive oracle (n <= 8)")
    p.add_argument("--theta", type=float, default=None)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("alloc", help="optimal deliveries for fixed routes")
    p.add_argument("instance")
    p.add_argument("--routes", required=True, help="JSON {'routes': [[...], ...]}")
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--outdir", default=".")
    p.set_defaults(func=cmd_alloc)

    for name, help_text, table in (
        ("pareto", "sweep the travel-time cap for the Pareto front", "front"),
        ("tradeoff", "front sweep plus trade-off table vs the fastest plan", "both"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("instance")
        p.add_argument("--solver", choices=["bnp", "oracle"], default="bnp")
        p.add_argument("--point-budget", type=float, default=600.0)
        p.add_argument("--delta", type=float, default=1.0)
        p.add_argument("--gamma", type=float, default=1e-4)
        p.add_argument("--lambda", dest="lam", type=float, default=None)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("-o", "--outdir", default=".")
        p.set_defaults(func=lambda a, t=table: cmd_pareto(a, t))

    p = sub.add_parser("pof", help="price-of-fairness table across caps")
    p.add_argument("instance")
    p.add_argument("--epsilons", default=None, help="comma-separated caps")
    p.add_argument("--steps", type=int, default=5, help="auto-grid size when --epsilons absent")
    p.add_argument("--gamma", type=float, default=1e-4)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--time-limit", type=float, default=600.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--outdir", default=".")
    p.set_defaults(func=cmd_pof)

    p = sub.add_parser("validate", help="check a solution file against an instance")
    p.add_argument("instance")
    p.add_argument("--solution", required=True)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    if "--config" in argv:
        # Pre-read config defaults; explicit flags still win.
        idx = argv.index("--config")
        try:
            with open(argv[idx + 1]) as fh:
                defaults = json.load(fh)
        except (OSError, IndexError, json.JSONDecodeError) as exc:
            parser.error(f"cannot read config: {exc}")
        for p in parser._subparsers._group_actions[0].choices.values():  # type: ignore[union-attr]
            known = {a.dest for a in p._actions}
            p.set_defaults(**{k: v for k, v in defaults.items() if k in known})
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except (ModelError, SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
