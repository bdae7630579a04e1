"""Discrete-event simulation of the multi-class loss system under a posted-price policy.

Customers of class j arrive as a Poisson stream, each with a private valuation.
A customer buys when the system has a free unit and the valuation is at least
the posted price of the current state; buyers hold one unit for a service time
drawn from an arbitrary positive distribution.

Thinning: rather than generating all market arrivals (rate = market size),
candidates are generated at the policy's largest rate for the class, with
valuations drawn conditionally on being at least the matching (lowest) price.
Accepting when the valuation clears the current price then reproduces the
state-dependent rate exactly, and makes huge markets with small rates cheap.

Random streams are keyed by (replication, class, purpose), so two policies
simulated with the same seed see identical customers.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .dynamic_solver import DynamicPolicy, Instance, PolicyShapeError
from .static_solver import StaticPolicy

WARMUP_FRACTION = 0.1
CHUNK = 4096
PURPOSE = {"arrival": 0, "valuation": 1, "service": 2}


@dataclass(frozen=True)
class ServiceSpec:
    """Service-time law with a given mean; ``cv`` is the coefficient of variation."""

    kind: str = "exponential"
    mean: float = 1.0
    cv: float = 1.0

    KINDS = ("exponential", "deterministic", "lognormal", "hyperexponential")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown service kind {self.kind!r}")
        if not self.mean > 0:
            raise ValueError("service mean must be positive")
        if self.kind in ("lognormal", "hyperexponential") and not self.cv > 0:
            raise ValueError("cv must be positive")
        if self.kind == "hyperexponential" and self.cv < 1:
            raise ValueError("hyperexponential needs cv >= 1")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        m = self.mean
        if self.kind == "exponential":
            return rng.exponential(m, n)
        if self.kind == "deterministic":
            return np.full(n, m)
        if self.kind == "lognormal":
            s2 = math.log1p(self.cv**2)
            return rng.lognormal(math.log(m) - s2 / 2, math.sqrt(s2), n)
        # two-phase hyperexponential with balanced means
        c2 = self.cv**2
        p = 0.5 * (1 + math.sqrt((c2 - 1) / (c2 + 1)))
        phase = rng.random(n) < p
        e = rng.exponential(1.0, n)
        return np.where(phase, e * m / (2 * p), e * m / (2 * (1 - p)))


@dataclass
class CI:
    mean: float
    half_width: float

    def to_dict(self):
        return {"mean": self.mean, "half_width": self.half_width}


@dataclass
class SimEstimate:
    revenue_rate: CI
    blocking: CI  # fraction of candidate arrivals that find the system full
    blocking_purchasers: CI  # among customers who would buy at the empty-state price
    occupancy_hist: np.ndarray
    occupancy_half_width: np.ndarray
    reps: int
    horizon: float
    seed: int
    per_rep_revenue: np.ndarray = field(repr=False)
    per_rep_blocking: np.ndarray = field(repr=False)

    def to_dict(self):
        return {
            "revenue_rate": self.revenue_rate.to_dict(),
            "blocking": self.blocking.to_dict(),
            "blocking_purchasers": self.blocking_purchasers.to_dict(),
            "occupancy_hist": self.occupancy_hist.tolist(),
            "occupancy_half_width": self.occupancy_half_width.tolist(),
            "reps": self.reps,
            "horizon": self.horizon,
            "seed": self.seed,
        }


def _ci(samples, level=0.95) -> CI:
    x = np.asarray(samples, dtype=float)
    n = len(x)
    if n < 2:
        return CI(float(x.mean()), math.inf)
    q = stats.t.ppf(0.5 + level / 2, n - 1)
    return CI(float(x.mean()), float(q * x.std(ddof=1) / math.sqrt(n)))


def _ci_vec(samples, level=0.95):
    x = np.asarray(samples, dtype=float)
    n = x.shape[0]
    q = stats.t.ppf(0.5 + level / 2, n - 1)
    return x.mean(axis=0), q * x.std(axis=0, ddof=1) / math.sqrt(n)


def _stream(seed: int, rep: int, j: int, purpose: str) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(rep, j, PURPOSE[purpose]))
    return np.random.Generator(np.random.Philox(ss))


def _rate_table(instance: Instance, policy):
    """Per-class rate lookup: dict from state tuple to rates, or a constant vector."""
    M = instance.M
    if isinstance(policy, StaticPolicy):
        if policy.rates.shape != (M,):
            raise PolicyShapeError(f"static policy has {policy.rates.shape} rates, expected {M}")
        return None, policy.rates.copy()
    if isinstance(policy, DynamicPolicy):
        if policy.space.C != instance.C or policy.space.M != M:
            raise PolicyShapeError("dynamic policy does not match the instance")
        table = {tuple(int(v) for v in x): policy.rates[k] for k, x in enumerate(policy.space.states)}
        open_ = policy.space.occupancy < instance.C
        return table, policy.rates[open_].max(axis=0)
    raise TypeError("policy must be a StaticPolicy or DynamicPolicy")


def _prices(instance: Instance, rates: np.ndarray) -> np.ndarray:
    out = np.empty(len(rates))
    for j, (c, lam) in enumerate(zip(instance.classes, rates)):
        out[j] = c.demand.inverse_price(min(lam, c.Lambda)) if lam > 0 else math.inf
    return out


def _run_one(instance, table, lam_max, services, horizon, seed, rep):
    C, M = instance.C, instance.M
    warm = WARMUP_FRACTION * horizon
    arr_rng = [_stream(seed, rep, j, "arrival") for j in range(M)]
    val_rng = [_stream(seed, rep, j, "valuation") for j in range(M)]
    svc_rng = [_stream(seed, rep, j, "service") for j in range(M)]
    active = [lam_max[j] > 0 for j in range(M)]

    # chunked per-class draws
    gaps = [None] * M
    vals = [None] * M
    svcs = [None] * M
    ptr = [CHUNK] * M

    def refill(j):
        gaps[j] = arr_rng[j].exponential(1.0 / lam_max[j], CHUNK)
        vals[j] = instance.classes[j].demand.sample_valuations(val_rng[j], CHUNK, min_rate=lam_max[j])
        svcs[j] = services[j].sample(svc_rng[j], CHUNK)
        ptr[j] = 0

    next_arr = np.full(M, math.inf)
    for j in range(M):
        if active[j]:
            refill(j)
            next_arr[j] = gaps[j][0]
            ptr[j] = 1

    # price lookup per state (cached)
    price_cache = {}
    if table is None:
        static_prices = _prices(instance, lam_max)

    def prices_at(x):
        if table is None:
            return static_prices
        key = tuple(x)
        p = price_cache.get(key)
        if p is None:
            p = _prices(instance, table[key])
            price_cache[key] = p
        return p

    ref_price = prices_at([0] * M)

    x = [0] * M
    occ = 0
    busy = []  # heap of (completion time, class)
    t = 0.0
    hist = np.zeros(C + 1)
    revenue = 0.0
    n_arr = n_block = n_pur = n_pur_block = 0
    while True:
        j = int(np.argmin(next_arr))
        t_arr = next_arr[j]
        t_dep = busy[0][0] if busy else math.inf
        t_next = min(t_arr, t_dep, horizon)
        if t_next > warm:
            hist[occ] += t_next - max(t, warm)
        t = t_next
        if t >= horizon:
            break
        if t_dep <= t_arr:
            _, k = heapq.heappop(busy)
            x[k] -= 1
            occ -= 1
            continue
        # arrival of a candidate of class j
        i = ptr[j] - 1
        v = vals[j][i]
        s = svcs[j][i]
        if ptr[j] >= CHUNK:
            refill(j)
            next_arr[j] = t + gaps[j][0]
            ptr[j] = 1
        else:
            next_arr[j] = t + gaps[j][ptr[j]]
            ptr[j] += 1
        counted = t > warm
        if occ >= C:
            if counted:
                n_arr += 1
                n_block += 1
                if v >= ref_price[j]:
                    n_pur += 1
                    n_pur_block += 1
            continue
        p = prices_at(x)[j]
        if counted:
            n_arr += 1
            if v >= ref_price[j]:
                n_pur += 1
        if v >= p:
            x[j] += 1
            occ += 1
            heapq.heappush(busy, (t + s, j))
            if counted:
                revenue += p
    span = horizon - warm
    return (
        revenue / span,
        n_block / n_arr if n_arr else 0.0,
        n_pur_block / n_pur if n_pur else 0.0,
        hist / hist.sum(),
    )


def _default_services(instance: Instance, service):
    if service is None:
        return [ServiceSpec("exponential", 1.0 / c.mu) for c in instance.classes]
    if isinstance(service, ServiceSpec):
        service = [service]
    service = list(service)
    if len(service) == 1 and instance.M > 1:
        service = service * instance.M
    if len(service) != instance.M:
        raise PolicyShapeError("need one service spec per class")
    return service


def simulate(instance: Instance, policy, service=None, horizon: float = 1e4, reps: int = 10, seed: int = 0) -> SimEstimate:
    """Replicated simulation; CIs are 95% t-intervals across replications."""
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    if reps < 2:
        raise ValueError("need at least 2 replications")
    services = _default_services(instance, service)
    table, lam_max = _rate_table(instance, policy)
    runs = [_run_one(instance, table, lam_max, services, horizon, seed, r) for r in range(reps)]
    rev = np.array([r[0] for r in runs])
    blk = np.array([r[1] for r in runs])
    pur = np.array([r[2] for r in runs])
    hists = np.array([r[3] for r in runs])
    hm, hh = _ci_vec(hists)
    return SimEstimate(
        revenue_rate=_ci(rev),
        blocking=_ci(blk),
        blocking_purchasers=_ci(pur),
        occupancy_hist=hm,
        occupancy_half_width=hh,
        reps=reps,
        horizon=horizon,
        seed=seed,
        per_rep_revenue=rev,
        per_rep_blocking=blk,
    )


@dataclass
class Comparison:
    estimates: list
    ratios: list  # policy k revenue over policy 0 revenue, paired across reps

    def to_dict(self):
        return {
            "estimates": [e.to_dict() for e in self.estimates],
            "ratios_vs_first": [r.to_dict() for r in self.ratios],
        }


def compare_policies(instance: Instance, policies, service=None, horizon: float = 1e4, reps: int = 10, seed: int = 0) -> Comparison:
    """Simulate several policies on common random numbers; ratios are against the first."""
    policies = list(policies)
    if len(policies) < 2:
        raise ValueError("need at least 2 policies")
    ests = [simulate(instance, p, service, horizon, reps, seed) for p in policies]
    base = ests[0].per_rep_revenue
    ratios = []
    for e in ests:
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(base > 0, e.per_rep_revenue / base, 1.0)
        ratios.append(_ci(r))
    return Comparison(ests, ratios)


def paired_difference(a: np.ndarray, b: np.ndarray) -> CI:
    return _ci(np.asarray(a) - np.asarray(b))
