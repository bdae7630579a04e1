"""Experiment drivers behind the CLI: ratio reports, tables, and the two-class example."""

from __future__ import annotations

import csv
import io
import time

import numpy as np

from .certifier import closed_form_case1, closed_form_case2, combined_bound, C_MIN
from .config import example_path, load_instance
from .demand import Exponential, Linear
from .dynamic_solver import CustomerClass, Instance, solve_dynamic, stationary_of_policy
from .loss_core import guarantee_G
from .static_solver import (
    constructed_static,
    fluid_heuristic,
    fluid_sweep,
    optimal_static,
    static_revenue,
)

FLUID_COLUMNS = ["M", "C", "seed", "demand_kind", "ratio_deltaC", "ratio_bestDelta", "ratio_optimal"]
GUARANTEE_COLUMNS = ["C", "G", "case1", "case2", "box", "combined"]
PARAM_RANGES = {"a": (0.1, 5.0), "b": (0.5, 10.0), "mu": (0.02, 20.0)}


def ratio_report(instance: Instance, tol: float = 1e-9, static_tol: float = 1e-10) -> dict:
    """Optimal dynamic revenue, constructed and optimal static revenues, and their ratios."""
    t0 = time.perf_counter()
    dyn = solve_dynamic(instance, tol=tol)
    st = stationary_of_policy(instance, dyn.policy)
    tilde = constructed_static(instance, dyn.policy, st)
    r_tilde = static_revenue(instance, tilde)
    opt = optimal_static(instance, tol=static_tol, extra_starts=[tilde.rates])
    return {
        "revenue_dynamic": dyn.revenue,
        "revenue_constructed": r_tilde,
        "revenue_static_opt": opt.revenue,
        "ratio_constructed": r_tilde / dyn.revenue,
        "ratio_static_opt": opt.revenue / dyn.revenue,
        "constructed_rates": tilde.rates.tolist(),
        "static_opt_rates": opt.policy.rates.tolist(),
        "service_level_dynamic": st.aggregate().alpha,
        "guarantee_G": guarantee_G(instance.C).value,
        "dynamic": dyn.to_dict(),
        "static": opt.to_dict(),
        "runtime_s": time.perf_counter() - t0,
    }


def repro_example1(tol: float = 1e-9) -> dict:
    loaded = load_instance(example_path("example1.json"))
    inst = loaded.instance
    rep = ratio_report(inst, tol=tol)
    dyn = solve_dynamic(inst, tol=tol)
    rep["class1_rates"] = np.nan_to_num(dyn.policy.class_matrix(0), nan=-1.0).tolist()
    rep["class2_rates"] = np.nan_to_num(dyn.policy.class_matrix(1), nan=-1.0).tolist()
    rep["rate_class1_empty"] = dyn.policy.rate((0, 0), 0)
    rep["rate_class1_two_busy"] = dyn.policy.rate((2, 0), 0)
    return rep


def random_instance(M: int, C: int, seed: int, demand_kind: str = "linear") -> Instance:
    """Random instance with coefficients uniform on the fixed experiment ranges."""
    rng = np.random.default_rng(seed)
    a = rng.uniform(*PARAM_RANGES["a"], M)
    b = rng.uniform(*PARAM_RANGES["b"], M)
    mu = rng.uniform(*PARAM_RANGES["mu"], M)
    cls = {"linear": Linear, "exponential": Exponential}[demand_kind]
    return Instance(C, tuple(CustomerClass(cls(float(x), float(y)), float(m)) for x, y, m in zip(a, b, mu)))


def fluid_row(M: int, C: int, seed: int, demand_kind: str, grid_points: int = 100) -> dict:
    """Fluid heuristics against the optimal static policy; optimal static against dynamic."""
    inst = random_instance(M, C, seed, demand_kind)
    sweep = fluid_sweep(inst, grid_points)
    at_C = static_revenue(inst, fluid_heuristic(inst, float(C)).policy)
    opt = optimal_static(inst, extra_starts=[sweep.best_policy.rates])
    dyn = solve_dynamic(inst)
    return {
        "M": M,
        "C": C,
        "seed": seed,
        "demand_kind": demand_kind,
        "ratio_deltaC": at_C / opt.revenue,
        "ratio_bestDelta": sweep.best_revenue / opt.revenue,
        "ratio_optimal": opt.revenue / dyn.revenue,
    }


def table_fluid(M: int, C: int, instances: int, seed: int, demand_kind: str = "linear") -> tuple[list, dict]:
    """Rows for ``instances`` random instances (instance i uses seed + i) and a summary."""
    if instances < 1:
        raise ValueError("instances must be >= 1")
    rows = [fluid_row(M, C, seed + i, demand_kind) for i in range(instances)]
    summary = {}
    for col in ("ratio_deltaC", "ratio_bestDelta", "ratio_optimal"):
        v = np.array([r[col] for r in rows])
        summary[col] = {"worst": float(v.min()), "average": float(v.mean())}
    summary.update({"M": M, "C": C, "seed": seed, "instances": instances, "demand_kind": demand_kind})
    return rows, summary


def rows_to_csv(rows, columns) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (f"{r[k]:.12g}" if isinstance(r[k], float) else r[k]) for k in columns})
    return buf.getvalue()


def table_guarantees(Cmax: int = 47, N: int = 500) -> list:
    """Per-C bounds: regular guarantee, both closed-form cases, box search, combined."""
    rows = []
    for C in range(C_MIN, Cmax + 1):
        cert = combined_bound(C, N)
        rows.append(
            {
                "C": C,
                "G": guarantee_G(C).value,
                "case1": closed_form_case1(C),
                "case2": closed_form_case2(C),
                "box": cert.cases["box"],
                "combined": cert.lower_bound,
            }
        )
    return rows
