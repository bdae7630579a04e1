"""Static (state-independent) pricing: constructed policy, optimal policy, fluid heuristic.

A static policy posts one rate per class regardless of occupancy.  Its revenue
is the total revenue rate thinned by the Erlang service level at the total
offered load, which is not concave; the optimum is found by projected gradient
ascent (the objective has a single stationary point on the box).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .dynamic_solver import DynamicPolicy, Instance, _check_regular
from .loss_core import FullStationary, erlang_b_derivative, service_level

log = logging.getLogger(__name__)

SHRINK = 0.5
SUFFICIENT_INCREASE = 1e-4
LIPSCHITZ_GRID = 1000
ROUNDOFF = 4e-16


class DegeneratePolicyError(ValueError):
    pass


class UniquenessError(RuntimeError):
    pass


@dataclass
class StaticPolicy:
    rates: np.ndarray

    def __post_init__(self):
        self.rates = np.asarray(self.rates, dtype=float)

    def to_dict(self):
        return {"rates": self.rates.tolist()}


@dataclass
class StaticSolveReport:
    policy: StaticPolicy
    revenue: float
    grad_norm: float
    starts_used: int
    lipschitz_bound: float
    iterations: int
    at_lower: np.ndarray = field(default_factory=lambda: np.zeros(0, bool))
    at_upper: np.ndarray = field(default_factory=lambda: np.zeros(0, bool))
    start_points: list = field(default_factory=list, repr=False)

    def to_dict(self):
        return {
            "rates": self.policy.rates.tolist(),
            "revenue": self.revenue,
            "grad_norm": self.grad_norm,
            "starts_used": self.starts_used,
            "lipschitz_bound": self.lipschitz_bound,
            "iterations": self.iterations,
        }


def _rates(policy) -> np.ndarray:
    return policy.rates if isinstance(policy, StaticPolicy) else np.asarray(policy, dtype=float)


def _class_revenues(instance: Instance, lam) -> np.ndarray:
    return np.array([c.demand.revenue(x) for c, x in zip(instance.classes, lam)])


def static_revenue(instance: Instance, policy) -> float:
    lam = _rates(policy)
    rho = float(np.sum(lam / instance.mus))
    return float(_class_revenues(instance, lam).sum() * service_level(instance.C, rho))


def static_gradient(instance: Instance, policy) -> np.ndarray:
    """Exact gradient of ``static_revenue`` (chain rule through the Erlang service level)."""
    lam = _rates(policy)
    mus = instance.mus
    rho = float(np.sum(lam / mus))
    S = service_level(instance.C, rho)
    dS = -erlang_b_derivative(instance.C, rho)
    total = _class_revenues(instance, lam).sum()
    rp = np.array(
        [c.demand.revenue_prime(max(x, c.demand.rate_floor)) for c, x in zip(instance.classes, lam)]
    )
    return rp * S + total * dS / mus


def static_gradient_product_form(instance: Instance, policy) -> np.ndarray:
    """Same gradient written as (R - mu_k r_k' h)(B - 1)/(mu_k h); used as a cross-check."""
    lam = _rates(policy)
    mus = instance.mus
    C = instance.C
    rho = float(np.sum(lam / mus))
    i = np.arange(C + 1)
    logt = i * np.log(rho) - np.cumsum(np.log(np.maximum(i, 1)))
    t = np.exp(logt - logt.max())
    s_c, s_c1, s_c2 = t.sum(), t[:C].sum(), t[: C - 1].sum()
    h = s_c1**2 / (s_c1**2 - s_c * s_c2)
    B = t[C] / s_c
    R = static_revenue(instance, lam)
    rp = np.array(
        [c.demand.revenue_prime(max(x, c.demand.rate_floor)) for c, x in zip(instance.classes, lam)]
    )
    return (R - mus * rp * h) * (B - 1.0) / (mus * h)


def constructed_static(instance: Instance, policy: DynamicPolicy, stationary: FullStationary) -> StaticPolicy:
    """Availability-conditioned average of the dynamic rates."""
    open_ = policy.space.occupancy < instance.C
    avail = float(stationary.probs[open_].sum())
    if avail <= 0.0:
        raise DegeneratePolicyError("the system is always full; the constructed policy is undefined")
    lam = (policy.rates[open_] * stationary.probs[open_, None]).sum(axis=0) / avail
    return StaticPolicy(lam)


def one_class_equivalent(instance: Instance, policy) -> tuple[float, float]:
    """Total rate and the rate-weighted service rate of a static policy.

    The one-class system with these two numbers has the same offered load,
    hence the same occupancy law.
    """
    lam = _rates(policy)
    total = float(lam.sum())
    if total <= 0:
        raise DegeneratePolicyError("a zero policy has no equivalent service rate")
    return total, total / float(np.sum(lam / instance.mus))


def lipschitz_bound(instance: Instance) -> float:
    """Lipschitz constant of the static revenue gradient on the box (sup norms on a grid)."""
    r2 = r1 = 0.0
    r0 = 0.0
    for c in instance.classes:
        g = np.linspace(c.peak_rate / 1000, c.peak_rate, LIPSCHITZ_GRID)
        r2 = max(r2, float(np.max(np.abs(c.demand.revenue_second(g)))))
        r1 = max(r1, float(np.max(np.abs(c.demand.revenue_prime(g)))))
        r0 += float(np.max(np.abs(c.demand.revenue(g))))
    mmin = float(instance.mus.min())
    return instance.M * (r2 + 2 * r1 / mmin + 3 * r0 / mmin**2)


def _projected_ascent(instance, x0, upper, L, tol, max_iter):
    """Spectral projected gradient ascent with Armijo backtracking.

    The first trial step is 1/L; later trial steps are Barzilai-Borwein
    estimates, which matter because class scales can differ by orders of
    magnitude.
    """
    f = lambda z: static_revenue(instance, z)
    x = np.clip(x0, 0.0, upper)
    fx = f(x)
    g = static_gradient(instance, x)
    step = 1.0 / L
    pg = np.inf
    for it in range(1, max_iter + 1):
        pg = float(np.linalg.norm(np.clip(x + g, 0.0, upper) - x))
        if pg <= tol:
            break
        t = step
        # a step that moves x by less than roundoff carries no information
        while np.max(np.abs(np.clip(x + t * g, 0.0, upper) - x) / upper) < 1e-9 and t < 1e30:
            t *= 10.0
        while True:
            xn = np.clip(x + t * g, 0.0, upper)
            d = xn - x
            fn = f(xn)
            if fn >= fx + SUFFICIENT_INCREASE * float(g @ d) or t < 1e-300:
                break
            t *= SHRINK
        if not np.any(d):
            break
        # predicted gain below roundoff in the revenue: no further measurable progress
        if float(g @ d) <= ROUNDOFF * abs(fx):
            x, fx = (xn, fn) if fn > fx else (x, fx)
            break
        gn = static_gradient(instance, xn)
        s, y = d, gn - g
        sy = float(s @ y)
        step = float(s @ s) / -sy if sy < 0 else 1e3 * t
        step = min(max(step, 1e-30), 1e30)
        stalled = t < 1e-300
        x, fx, g = xn, fn, gn
        if stalled:
            break
    return x, fx, pg, it


def _theta_path(instance: Instance, theta: float) -> np.ndarray:
    """Rates equalizing marginal revenue to theta/mu_j, clamped to the box."""
    return np.array(
        [c.demand.marginal_inverse(theta / c.mu) for c in instance.classes], dtype=float
    ).ravel()


def _polish(instance: Instance, x: np.ndarray) -> np.ndarray:
    """Refine an approximate optimum along the curve of first-order-consistent points.

    Every stationary point sits on the curve r_j' = theta/mu_j; a golden-section
    search over theta near the current estimate sharpens the last digits.
    """
    rp = np.array([c.demand.revenue_prime(max(v, c.demand.rate_floor)) for c, v in zip(instance.classes, x)])
    interior = (x > 0) & (x < instance.peak_rates)
    if not np.any(interior):
        return x
    theta0 = float(np.median((rp * instance.mus)[interior]))
    if not theta0 > 0:
        return x
    lo, hi = np.log(theta0) - 1.0, np.log(theta0) + 1.0
    f = lambda u: static_revenue(instance, _theta_path(instance, np.exp(u)))
    gr = (np.sqrt(5) - 1) / 2
    a, b = lo, hi
    c1, c2 = b - gr * (b - a), a + gr * (b - a)
    f1, f2 = f(c1), f(c2)
    for _ in range(120):
        if f1 >= f2:
            b, c2, f2 = c2, c1, f1
            c1 = b - gr * (b - a)
            f1 = f(c1)
        else:
            a, c1, f1 = c1, c2, f2
            c2 = a + gr * (b - a)
            f2 = f(c2)
    cand = _theta_path(instance, np.exp(0.5 * (a + b)))
    return cand if static_revenue(instance, cand) > static_revenue(instance, x) else x


def optimal_static(
    instance: Instance,
    tol: float = 1e-10,
    starts: int = 5,
    seed: int = 0,
    extra_starts=(),
    max_iter: int = 100_000,
    polish: bool = True,
) -> StaticSolveReport:
    """Best static policy by multi-start projected gradient ascent.

    Default starts: the box center, the upper corner, and random points of the
    box; ``extra_starts`` (e.g. the constructed policy) are prepended.  All
    converged points must agree; a disagreement beyond 1e-4 means the input
    violates the uniqueness premise and raises ``UniquenessError``.
    """
    _check_regular(instance)
    upper = instance.peak_rates
    L = lipschitz_bound(instance)
    rng = np.random.default_rng(seed)
    pts = [np.asarray(s, dtype=float) for s in extra_starts]
    pts += [0.5 * upper, upper.copy()]
    while len(pts) < starts:
        pts.append(rng.uniform(0.0, 1.0, instance.M) * upper)
    pts = pts[:max(starts, len(extra_starts))]
    results = []
    total_it = 0
    for p in pts:
        x, fx, pg, it = _projected_ascent(instance, p, upper, L, tol, max_iter)
        if polish:
            x = _polish(instance, x)
            fx = static_revenue(instance, x)
        total_it += it
        results.append((x, fx))
    best = max(results, key=lambda r: r[1])
    scale = np.maximum(upper, 1e-300)
    spread = max(float(np.max(np.abs(x - best[0]) / scale)) for x, _ in results)
    if spread > 1e-4:
        raise UniquenessError(f"starts converged to different points (relative spread {spread:.3g})")
    if spread > 1e-6:
        log.warning("optimal_static: starts agree only to %.2g", spread)
    x = best[0]
    g = static_gradient(instance, x)
    pg = float(np.linalg.norm(np.clip(x + g, 0.0, upper) - x))
    return StaticSolveReport(
        policy=StaticPolicy(x),
        revenue=best[1],
        grad_norm=pg,
        starts_used=len(pts),
        lipschitz_bound=L,
        iterations=total_it,
        at_lower=x <= 0.0,
        at_upper=x >= upper,
        start_points=[r[0] for r in results],
    )


@dataclass
class FluidResult:
    policy: StaticPolicy
    theta: float
    load: float
    binding: bool


def fluid_heuristic(instance: Instance, delta: float, iters: int = 200, eps: float = 1e-12) -> FluidResult:
    """Maximize total revenue subject to total offered load <= delta, by dual bisection."""
    if delta < 0:
        raise ValueError("delta must be non-negative")
    mus = instance.mus
    upper = instance.peak_rates
    if delta == 0:
        return FluidResult(StaticPolicy(np.zeros(instance.M)), np.inf, 0.0, True)
    full = float(np.sum(upper / mus))
    if full <= delta:
        return FluidResult(StaticPolicy(upper.copy()), 0.0, full, False)
    hi = max(
        float(c.mu * c.demand.revenue_prime(max(eps * c.peak_rate, c.demand.rate_floor)))
        for c in instance.classes
    )
    lo = 0.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if np.sum(_theta_path(instance, mid) / mus) > delta:
            lo = mid
        else:
            hi = mid
    lam = _theta_path(instance, hi)
    # classes with flat marginal revenue jump at theta; spend leftover load on them
    slack = delta - float(np.sum(lam / mus))
    lam_lo = _theta_path(instance, lo)
    for j in np.argsort(-mus):
        if slack <= 0:
            break
        extra = min((lam_lo[j] - lam[j]), slack * mus[j])
        if extra > 0:
            lam[j] += extra
            slack -= extra / mus[j]
    return FluidResult(StaticPolicy(lam), hi, float(np.sum(lam / mus)), True)


@dataclass
class FluidSweep:
    best_policy: StaticPolicy
    best_revenue: float
    delta_star: float
    deltas: np.ndarray
    revenues: np.ndarray


def fluid_sweep(instance: Instance, grid_points: int = 100) -> FluidSweep:
    """Best fluid policy over an evenly spaced load budget grid on [0, 3C], endpoints included."""
    if grid_points < 2:
        raise ValueError("grid_points must be >= 2")
    deltas = np.linspace(0.0, 3.0 * instance.C, grid_points)
    pols = [fluid_heuristic(instance, d).policy for d in deltas]
    revs = np.array([static_revenue(instance, p) for p in pols])
    k = int(np.argmax(revs))
    return FluidSweep(pols[k], float(revs[k]), float(deltas[k]), deltas, revs)
