"""Erlang loss primitives: state spaces, stationary occupancy laws, blocking, ratio function.

All Erlang-type sums go through normalized recursions so that loads in the
thousands and capacities near 64 never touch raw factorials.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations

import numpy as np

STATE_GUARD = 10**7
EXACT_G_MAX_C = 64


class CapacityError(ValueError):
    pass


class LossDomainError(ValueError):
    pass


@dataclass
class OccupancyDistribution:
    """Law of the number of busy units, 0..C."""

    probs: np.ndarray
    alpha: float = field(init=False)
    beta: float = field(init=False)
    alpha_zero: bool = field(init=False)

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        self.probs = p
        C = len(p) - 1
        self.alpha = float(1.0 - p[C]) if C > 0 else 0.0
        # Recompute from the open states to avoid cancellation when P_C ~ 1.
        if C > 0:
            self.alpha = float(p[:C].sum())
        self.alpha_zero = self.alpha <= 0.0
        if self.alpha_zero:
            self.beta = 0.0
        else:
            i = np.arange(1, C)
            self.beta = float(np.dot(i, p[1:C]) / self.alpha)

    @property
    def C(self) -> int:
        return len(self.probs) - 1

    def mean(self) -> float:
        return float(np.dot(np.arange(self.C + 1), self.probs))

    def to_dict(self):
        return {"probs": self.probs.tolist(), "alpha": self.alpha, "beta": self.beta}


@dataclass
class StateSpace:
    """All (x_1..x_M) with sum <= C, in lexicographic order."""

    C: int
    M: int
    states: np.ndarray  # (n, M) int
    _index: dict

    def __len__(self):
        return len(self.states)

    def index(self, state) -> int:
        return self._index[tuple(int(v) for v in state)]

    @property
    def occupancy(self) -> np.ndarray:
        return self.states.sum(axis=1)

    def neighbours(self, j: int, step: int) -> np.ndarray:
        """Index of x + step*e_j for every state, -1 where it leaves the space."""
        out = np.full(len(self), -1, dtype=np.int64)
        for k, x in enumerate(self.states):
            y = list(x)
            y[j] += step
            if y[j] >= 0 and sum(y) <= self.C:
                out[k] = self._index[tuple(y)]
        return out


def enumerate_states(C: int, M: int) -> StateSpace:
    if C < 1 or M < 1:
        raise LossDomainError("need C >= 1 and M >= 1")
    n = math.comb(C + M, M)
    if n > STATE_GUARD:
        raise CapacityError(f"state space of size {n} exceeds the guard of {STATE_GUARD} states")
    # Stars and bars: choose M bar positions among C+M slots; the gaps give
    # x_1..x_M plus the slack.  Reverse to get lexicographic order in x.
    rows = []
    for bars in combinations(range(C + M), M):
        prev = -1
        x = []
        for b in bars:
            x.append(b - prev - 1)
            prev = b
        rows.append(x)
    states = np.array(rows, dtype=np.int64)
    order = np.lexsort(states.T[::-1])
    states = states[order]
    index = {tuple(int(v) for v in s): k for k, s in enumerate(states)}
    return StateSpace(C=C, M=M, states=states, _index=index)


@dataclass
class FullStationary:
    space: StateSpace
    probs: np.ndarray
    restricted: bool = False  # chain restricted to the class reachable from the empty state

    def aggregate(self) -> OccupancyDistribution:
        occ = np.bincount(self.space.occupancy, weights=self.probs, minlength=self.space.C + 1)
        return OccupancyDistribution(occ)


def birth_death_stationary(lambdas, mu: float, C: int | None = None) -> OccupancyDistribution:
    """Stationary law of the birth-death chain with birth rate lambdas[i] in state i
    and death rate i*mu.
    """
    lam = np.asarray(lambdas, dtype=float)
    if C is None:
        C = len(lam)
    if len(lam) != C:
        raise LossDomainError("need exactly C birth rates")
    if not mu > 0:
        raise LossDomainError("mu must be positive")
    if np.any(lam < 0):
        raise LossDomainError("birth rates must be non-negative")
    # log-weights, so a zero rate cleanly zeroes the tail
    logw = np.full(C + 1, -np.inf)
    logw[0] = 0.0
    with np.errstate(divide="ignore"):
        steps = np.log(lam) - np.log(mu * np.arange(1, C + 1))
    for i in range(1, C + 1):
        logw[i] = logw[i - 1] + steps[i - 1]
    m = np.max(logw)
    w = np.exp(logw - m)
    return OccupancyDistribution(w / w.sum())


def birth_death_general(births, deaths) -> OccupancyDistribution:
    """Stationary law with birth rate births[i] out of state i and total death
    rate deaths[i-1] out of state i (i = 1..C)."""
    lam = np.asarray(births, dtype=float)
    dth = np.asarray(deaths, dtype=float)
    if lam.shape != dth.shape:
        raise LossDomainError("need as many death rates as birth rates")
    if np.any(dth <= 0) or np.any(lam < 0):
        raise LossDomainError("death rates must be positive and birth rates non-negative")
    with np.errstate(divide="ignore"):
        steps = np.log(lam) - np.log(dth)
    logw = np.concatenate([[0.0], np.cumsum(steps)])
    w = np.exp(logw - logw.max())
    return OccupancyDistribution(w / w.sum())


def erlang_b(C: int, rho):
    """Blocking probability of M/M/C/C at offered load rho; vectorized over rho."""
    r = np.asarray(rho, dtype=float)
    b = np.ones_like(r)
    for k in range(1, C + 1):
        b = r * b / (k + r * b)
    return float(b) if b.ndim == 0 else b


def service_level(C: int, rho):
    """1 - erlang_b(C, rho), computed as C/(C + rho*B_{C-1}) to avoid cancellation at heavy load."""
    r = np.asarray(rho, dtype=float)
    if C == 0:
        out = np.zeros_like(r)
    else:
        out = C / (C + r * erlang_b(C - 1, r))
    return float(out) if np.ndim(out) == 0 else out


def erlang_b_derivative(C: int, rho):
    """d/d rho of erlang_b.

    Written as (B/rho) * C * (C - carried load with C-1 units)/(C + rho*B_{C-1}),
    which has no cancellation at heavy load.
    """
    r = np.asarray(rho, dtype=float)
    if C == 0:
        out = np.zeros_like(r)
    else:
        bm = erlang_b(C - 1, r)
        carried = r * service_level(C - 1, r)
        den = C + r * bm
        out = bm / den * C * (C - carried) / den
    return float(out) if np.ndim(out) == 0 else out


def erlang_occupancy(C: int, rho: float) -> OccupancyDistribution:
    """Truncated Poisson law of occupancy at total load rho."""
    i = np.arange(C + 1)
    if rho == 0:
        p = np.zeros(C + 1)
        p[0] = 1.0
        return OccupancyDistribution(p)
    logw = i * math.log(rho) - np.array([math.lgamma(k + 1) for k in i])
    w = np.exp(logw - logw.max())
    return OccupancyDistribution(w / w.sum())


def multiclass_static_occupancy(C: int, offered_loads) -> OccupancyDistribution:
    loads = np.asarray(offered_loads, dtype=float)
    if np.any(loads < 0):
        raise LossDomainError("offered loads must be non-negative")
    return erlang_occupancy(C, float(loads.sum()))


def ratio_R(C: int, alpha, beta):
    """Service-level ratio of the constructed static policy, as a function of (alpha, beta).

    Its limit as alpha -> 0+ is 1; alpha <= 0 is rejected.
    """
    a = np.asarray(alpha, dtype=float)
    b = np.asarray(beta, dtype=float)
    if np.any(a <= 0) or np.any(a > 1 + 1e-15):
        raise LossDomainError("alpha must lie in (0, 1]")
    w = C * (1.0 / a - 1.0) + b
    out = service_level(C, w) / a
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class Guarantee:
    C: int
    exact: Fraction | None
    value: float


def guarantee_G(C: int) -> Guarantee:
    """Worst-case static/dynamic ratio for regular valuations at capacity C."""
    if C < 1:
        raise LossDomainError("C must be >= 1")
    value = service_level(C, float(C - 1))
    exact = None
    if C <= EXACT_G_MAX_C:
        load = C - 1
        terms = [Fraction(load**i, math.factorial(i)) for i in range(C + 1)]
        exact = 1 - terms[C] / sum(terms)
        value = float(exact)
    return Guarantee(C=C, exact=exact, value=value)
