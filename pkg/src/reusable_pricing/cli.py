"""Command-line entry point.

Exit status: 0 success, 2 usage or config error, 1 computation error.
Artifacts go to --out (JSON reports, CSV tables); the resolved arguments and
seed are logged and saved next to them as run.json.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .certifier import c2_mhr_bound, c2_uniform_bound, certify_box, closed_form_case1, closed_form_case2, mhr_guarantee
from .config import ConfigError, example_path, instance_to_dict, load_instance
from .dynamic_solver import solve_dynamic, stationary_of_policy
from .experiments import (
    FLUID_COLUMNS,
    GUARANTEE_COLUMNS,
    ratio_report,
    repro_example1,
    rows_to_csv,
    table_fluid,
    table_guarantees,
)
from .simulator import ServiceSpec, compare_policies
from .static_solver import constructed_static, fluid_heuristic, fluid_sweep, optimal_static

log = logging.getLogger("reusable_pricing")


class UsageError(Exception):
    pass


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(type(o).__name__)


def _write(out: Path, name: str, payload) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    p = out / name
    if isinstance(payload, str):
        p.write_text(payload)
    else:
        p.write_text(json.dumps(payload, indent=2, default=_json_default) + "\n")
    log.info("wrote %s", p)
    return p


def _config(args):
    path = args.config or example_path("example1.json")
    loaded = load_instance(path)
    log.info("config %s: %s", path, json.dumps(instance_to_dict(loaded), default=_json_default))
    return loaded


def cmd_solve_dynamic(args):
    loaded = _config(args)
    tol = args.tol or loaded.tolerances["dynamic"]
    rep = solve_dynamic(loaded.instance, tol=tol)
    st = stationary_of_policy(loaded.instance, rep.policy)
    doc = rep.to_dict()
    doc["occupancy"] = st.aggregate().to_dict()
    doc["tol"] = tol
    _write(args.out, "dynamic.json", doc)
    print(f"revenue {rep.revenue:.8g}  ({rep.iterations} iterations, span {rep.span_residual:.2e})")


def cmd_solve_static(args):
    loaded = _config(args)
    inst = loaded.instance
    tol = args.tol or loaded.tolerances["static"]
    opt = optimal_static(inst, tol=tol, seed=args.seed)
    doc = {"optimal": opt.to_dict()}
    sweep = fluid_sweep(inst)
    doc["fluid_best"] = {"delta": sweep.delta_star, "revenue": sweep.best_revenue, "rates": sweep.best_policy.rates}
    if args.delta is not None:
        fl = fluid_heuristic(inst, args.delta)
        from .static_solver import static_revenue

        doc["fluid_at_delta"] = {
            "delta": args.delta,
            "rates": fl.policy.rates,
            "revenue": static_revenue(inst, fl.policy),
            "theta": fl.theta if np.isfinite(fl.theta) else None,
        }
    _write(args.out, "static.json", doc)
    print(f"optimal static revenue {opt.revenue:.8g} at rates {np.array2string(opt.policy.rates, precision=6)}")


def cmd_ratio(args):
    loaded = _config(args)
    rep = ratio_report(loaded.instance, tol=args.tol or loaded.tolerances["dynamic"])
    _write(args.out, "ratio.json", rep)
    print(
        f"dynamic {rep['revenue_dynamic']:.6g}  constructed {rep['revenue_constructed']:.6g} "
        f"(ratio {rep['ratio_constructed']:.5f})  optimal static {rep['revenue_static_opt']:.6g} "
        f"(ratio {rep['ratio_static_opt']:.5f})"
    )


def cmd_certify(args):
    if args.all:
        g = mhr_guarantee(args.grid)
        _write(args.out, "mhr_guarantee.json", g.to_dict())
        print(f"overall {g.overall:.6f} at C={g.argmin_C} (tail G(48) = {g.tail:.6f})")
        return
    if args.C is None:
        raise UsageError("certify needs --C or --all")
    if args.C == 2:
        m, u = c2_mhr_bound(), c2_uniform_bound()
        doc = {"C": 2, "mhr": {"bound": m.bound, "argmin": m.argmin}, "uniform": {"bound": u.bound, "argmin": u.argmin}}
        _write(args.out, "certificate_C2.json", doc)
        print(f"C=2 MHR bound {m.bound:.6f}, uniform bound {u.bound:.6f}")
        return
    if not 3 <= args.C <= 47:
        raise UsageError("--C must be 2 or lie in 3..47 (larger C is covered by the regular guarantee)")
    cert = certify_box(args.C, args.grid)
    cases = {"case1": closed_form_case1(args.C), "case2": closed_form_case2(args.C), "box": cert.lower_bound}
    doc = {
        "C": args.C,
        "N": args.grid,
        "bound": min(cases.values()),
        "argmin_box": cert.argmin_box,
        "cases": cases,
        "runtime_s": cert.runtime,
    }
    _write(args.out, f"certificate_C{args.C}.json", doc)
    print(f"C={args.C} N={args.grid}: box {cert.lower_bound:.6f}, combined {doc['bound']:.6f}")


def cmd_simulate(args):
    loaded = _config(args)
    inst = loaded.instance
    seed = args.seed if args.seed is not None else (loaded.seed or 0)
    dyn = solve_dynamic(inst, tol=loaded.tolerances["dynamic"])
    st = stationary_of_policy(inst, dyn.policy)
    tilde = constructed_static(inst, dyn.policy, st)
    policies = {"dynamic": dyn.policy, "constructed": tilde}
    if args.with_optimal_static:
        policies["optimal_static"] = optimal_static(inst, extra_starts=[tilde.rates]).policy
    services = [ServiceSpec(args.service, 1.0 / c.mu, args.cv) for c in inst.classes]
    cmp = compare_policies(inst, list(policies.values()), services, args.horizon, args.reps, seed)
    doc = {"seed": seed, "horizon": args.horizon, "reps": args.reps, "service": args.service, "policies": {}}
    for name, est, ratio in zip(policies, cmp.estimates, cmp.ratios):
        doc["policies"][name] = {"estimate": est.to_dict(), "ratio_vs_dynamic": ratio.to_dict()}
    doc["analytic_dynamic_revenue"] = dyn.revenue
    _write(args.out, "simulation.json", doc)
    for name, ratio in zip(policies, cmp.ratios):
        print(f"{name}: ratio vs dynamic {ratio.mean:.5f} +/- {ratio.half_width:.5f}")


def cmd_table_guarantees(args):
    rows = table_guarantees(args.Cmax, args.grid)
    _write(args.out, "table_guarantees.csv", rows_to_csv(rows, GUARANTEE_COLUMNS))
    k = min(range(len(rows)), key=lambda i: rows[i]["combined"])
    print(f"min combined bound {rows[k]['combined']:.6f} at C={rows[k]['C']}")


def cmd_table_fluid(args):
    seed = 0 if args.seed is None else args.seed
    rows, summary = table_fluid(args.M, args.C, args.instances, seed, args.demand)
    _write(args.out, "table_fluid.csv", rows_to_csv(rows, FLUID_COLUMNS))
    _write(args.out, "table_fluid_summary.json", summary)
    for col in ("ratio_deltaC", "ratio_bestDelta", "ratio_optimal"):
        print(f"{col}: worst {summary[col]['worst']:.6f}  average {summary[col]['average']:.6f}")


def cmd_repro_example1(args):
    rep = repro_example1(tol=args.tol or 1e-9)
    _write(args.out, "example1.json", rep)
    print(
        f"dynamic {rep['revenue_dynamic']:.5f}  constructed rates {np.round(rep['constructed_rates'], 5).tolist()} "
        f"revenue {rep['revenue_constructed']:.5f}  ratio {rep['ratio_constructed']:.4f}"
    )


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="reusable-pricing", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        sp.add_argument("--out", type=Path, default=Path("results"), help="output directory")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--tol", type=float, default=None)
        if config:
            sp.add_argument("--config", type=Path, default=None, help="instance JSON (default: the two-class example)")

    sp = sub.add_parser("solve-dynamic", help="optimal dynamic policy")
    common(sp)
    sp.set_defaults(func=cmd_solve_dynamic)

    sp = sub.add_parser("solve-static", help="optimal static policy and fluid heuristics")
    common(sp)
    sp.add_argument("--delta", type=float, default=None, help="load budget for the fluid heuristic")
    sp.set_defaults(func=cmd_solve_static)

    sp = sub.add_parser("ratio", help="static/dynamic revenue ratios")
    common(sp)
    sp.set_defaults(func=cmd_ratio)

    sp = sub.add_parser("certify", help="MHR lower bound for one capacity (or all)")
    common(sp, config=False)
    sp.add_argument("--C", type=int, default=None)
    sp.add_argument("--grid", type=int, default=500)
    sp.add_argument("--all", action="store_true", help="combined bound over C = 3..47 and the tail")
    sp.set_defaults(func=cmd_certify)

    sp = sub.add_parser("simulate", help="simulate dynamic vs constructed static policy")
    common(sp)
    sp.add_argument("--horizon", type=float, default=1e4)
    sp.add_argument("--reps", type=int, default=10)
    sp.add_argument("--service", choices=ServiceSpec.KINDS, default="exponential")
    sp.add_argument("--cv", type=float, default=1.0)
    sp.add_argument("--with-optimal-static", action="store_true")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("table-guarantees", help="CSV of per-capacity bounds")
    common(sp, config=False)
    sp.add_argument("--Cmax", type=int, default=47)
    sp.add_argument("--grid", type=int, default=500)
    sp.set_defaults(func=cmd_table_guarantees)

    sp = sub.add_parser("table-fluid", help="fluid heuristics vs optimal static on random instances")
    common(sp, config=False)
    sp.add_argument("--M", type=int, default=5)
    sp.add_argument("--C", type=int, default=5)
    sp.add_argument("--instances", type=int, default=50)
    sp.add_argument("--demand", choices=("linear", "exponential"), default="linear")
    sp.set_defaults(func=cmd_table_fluid)

    sp = sub.add_parser("repro-example1", help="reproduce the two-class example")
    common(sp, config=False)
    sp.set_defaults(func=cmd_repro_example1)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on usage errors
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    resolved = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items() if k != "func"}
    resolved["REPL_THREADS"] = os.environ.get("REPL_THREADS")
    log.info("resolved arguments: %s", json.dumps(resolved))
    try:
        args.func(args)
        _write(args.out, "run.json", resolved)
    except (UsageError, ConfigError) as err:
        parser.print_usage(sys.stderr)
        print(f"error: {err}", file=sys.stderr)
        return 2
    except Exception as err:  # computation failures
        log.error("%s: %s", type(err).__name__, err)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
