"""Demand curves: the price <-> effective-arrival-rate mapping of one customer class.

Every curve exposes the same small interface (rate, price, revenue and its
derivatives, the revenue-maximizing rate, hazard rate, valuation sampling), so
the solvers never branch on the curve kind.

Rates are customers per unit time, prices are money, revenue is money per unit
time.  ``max_rate`` is the market size: the effective rate at the lowest price.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import ClassVar

import numpy as np

# Evaluation floor for curves whose price diverges as the rate goes to zero.
RATE_FLOOR = 1e-12
CLASSIFY_GRID = 1000


class DemandDomainError(ValueError):
    """A rate or price outside the curve's domain."""


@dataclass(frozen=True)
class Classification:
    regular: bool
    mhr: bool


class DemandCurve:
    """Base class; subclasses are frozen dataclasses holding the coefficients."""

    kind: ClassVar[str] = ""

    # --- curve-specific pieces -------------------------------------------
    @property
    def max_rate(self) -> float:
        raise NotImplementedError

    def _rate(self, price):
        raise NotImplementedError

    def _price(self, rate):
        raise NotImplementedError

    def _price_prime(self, rate):
        raise NotImplementedError

    def _revenue_prime(self, rate):
        raise NotImplementedError

    def _revenue_second(self, rate):
        raise NotImplementedError

    def _hazard(self, price):
        raise NotImplementedError

    def _tail_valuation(self, u):
        """Valuation v with P(V >= v) = u, for u in (0, 1]."""
        raise NotImplementedError

    @property
    def peak_rate(self) -> float:
        raise NotImplementedError

    def params(self) -> dict:
        raise NotImplementedError

    # --- shared behaviour ---------------------------------------------------
    @property
    def rate_floor(self) -> float:
        return RATE_FLOOR * self.max_rate

    def _check_rate(self, rate):
        r = np.asarray(rate, dtype=float)
        if np.any(r <= 0) or np.any(r > self.max_rate * (1 + 1e-12)):
            raise DemandDomainError(
                f"rate must lie in (0, {self.max_rate}] for {self.kind} demand"
            )
        return np.maximum(r, self.rate_floor)

    def effective_rate(self, price):
        """Effective arrival rate at ``price``; 0 at an infinite price."""
        p = np.asarray(price, dtype=float)
        if np.any(p < 0):
            raise DemandDomainError("price must be non-negative")
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            out = np.where(np.isinf(p), 0.0, self._rate(np.where(np.isinf(p), 0.0, p)))
        out = np.clip(out, 0.0, self.max_rate)
        return float(out) if out.ndim == 0 else out

    def inverse_price(self, rate):
        """Price p(rate) at which the effective arrival rate equals ``rate``."""
        r = self._check_rate(rate)
        out = self._price(r)
        return float(out) if np.ndim(out) == 0 else out

    def price_prime(self, rate):
        r = self._check_rate(rate)
        out = self._price_prime(r)
        return float(out) if np.ndim(out) == 0 else out

    def revenue(self, rate):
        """r(rate) = rate * p(rate); 0 at rate 0 (nothing is sold)."""
        r = np.asarray(rate, dtype=float)
        if np.any(r < 0) or np.any(r > self.max_rate * (1 + 1e-12)):
            raise DemandDomainError(f"rate must lie in [0, {self.max_rate}]")
        pos = r > 0
        rr = np.where(pos, np.maximum(r, self.rate_floor), self.max_rate)
        out = np.where(pos, rr * self._price(rr), 0.0)
        return float(out) if out.ndim == 0 else out

    def revenue_prime(self, rate):
        r = self._check_rate(rate)
        out = self._revenue_prime(r)
        return float(out) if np.ndim(out) == 0 else out

    def revenue_second(self, rate):
        r = self._check_rate(rate)
        out = self._revenue_second(r) + 0.0 * r
        return float(out) if np.ndim(out) == 0 else out

    def hazard(self, price):
        """Hazard rate f(p)/(1 - F(p)) of the valuation distribution."""
        out = self._hazard(np.asarray(price, dtype=float))
        return float(out) if np.ndim(out) == 0 else out

    def best_response(self, shift):
        """argmax over rate in [0, peak_rate] of r(rate) + rate * shift.

        ``shift`` is an array (e.g. a value-function increment).  Uses the
        first-order condition r'(rate) = -shift, which is exact for concave r.
        Ties resolve to the smallest maximizing rate.
        """
        return self.marginal_inverse(-np.asarray(shift, dtype=float))

    def marginal_inverse(self, slope):
        """Rate in [0, peak_rate] where r' equals ``slope`` (clamped to the box).

        Generic bisection on the decreasing r'; subclasses override with
        closed forms.
        """
        s = np.atleast_1d(np.asarray(slope, dtype=float))
        lo = np.full_like(s, self.rate_floor)
        hi = np.full_like(s, self.peak_rate)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            up = self._revenue_prime(mid) > s
            lo = np.where(up, mid, lo)
            hi = np.where(up, hi, mid)
        out = 0.5 * (lo + hi)
        out = np.where(self._revenue_prime(np.full_like(s, self.rate_floor)) <= s, 0.0, out)
        out = np.where(s <= 0, self.peak_rate, out)
        return out if np.ndim(slope) else float(out[0])

    def price_grid(self, n: int = CLASSIFY_GRID):
        """Prices spanning the valuation support, low to high."""
        rates = np.linspace(self.max_rate, 1e-3 * self.max_rate, n)
        return self._price(rates)

    def classify(self) -> Classification:
        rates = np.linspace(self.max_rate / CLASSIFY_GRID, self.max_rate, CLASSIFY_GRID)
        regular = bool(np.all(self._revenue_second(rates) + 0.0 * rates <= 1e-10))
        h = self._hazard(self.price_grid())
        tol = 1e-12 * np.max(np.abs(h))
        mhr = bool(np.all(np.diff(h) >= -tol))
        return Classification(regular=regular, mhr=mhr)

    def sample_valuations(self, rng: np.random.Generator, n: int, min_rate: float | None = None):
        """Draw valuations of arriving customers.

        With ``min_rate`` set, draws are conditioned on V >= p(min_rate), i.e.
        only customers who would buy at the price matching ``min_rate``.
        """
        frac = 1.0 if min_rate is None else min(1.0, min_rate / self.max_rate)
        u = (1.0 - rng.random(n)) * frac
        return self._tail_valuation(u)

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params()}


@dataclass(frozen=True)
class Linear(DemandCurve):
    """p(rate) = b - a*rate: uniform valuations on [0, b], market size b/a."""

    a: float
    b: float
    kind: ClassVar[str] = "linear"

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise DemandDomainError("linear demand needs a > 0 and b > 0")

    @property
    def max_rate(self):
        return self.b / self.a

    @property
    def peak_rate(self):
        return self.b / (2 * self.a)

    def _rate(self, price):
        return np.maximum(self.b - price, 0.0) / self.a

    def _price(self, rate):
        return self.b - self.a * rate

    def _price_prime(self, rate):
        return -self.a + 0.0 * rate

    def _revenue_prime(self, rate):
        return self.b - 2 * self.a * rate

    def _revenue_second(self, rate):
        return -2 * self.a + 0.0 * rate

    def _hazard(self, price):
        with np.errstate(divide="ignore"):
            return np.where(price < self.b, 1.0 / (self.b - price), np.inf)

    def _tail_valuation(self, u):
        return self.b * (1.0 - u)

    def marginal_inverse(self, slope):
        out = np.clip((self.b - np.asarray(slope, dtype=float)) / (2 * self.a), 0.0, self.peak_rate)
        return out if np.ndim(out) else float(out)

    def params(self):
        return {"a": self.a, "b": self.b}


@dataclass(frozen=True)
class Exponential(DemandCurve):
    """p(rate) = a*ln(b/(a*rate)): exponential valuations with mean a, market size b/a."""

    a: float
    b: float
    kind: ClassVar[str] = "exponential"

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise DemandDomainError("exponential demand needs a > 0 and b > 0")

    @property
    def max_rate(self):
        return self.b / self.a

    @property
    def peak_rate(self):
        return self.b / (self.a * math.e)

    def _rate(self, price):
        return self.max_rate * np.exp(-price / self.a)

    def _price(self, rate):
        return self.a * np.log(self.b / (self.a * rate))

    def _price_prime(self, rate):
        return -self.a / rate

    def _revenue_prime(self, rate):
        return self.a * np.log(self.b / (self.a * rate)) - self.a

    def _revenue_second(self, rate):
        return -self.a / rate

    def _hazard(self, price):
        return np.full_like(np.asarray(price, dtype=float), 1.0 / self.a)

    def _tail_valuation(self, u):
        return -self.a * np.log(u)

    def price_grid(self, n=CLASSIFY_GRID):
        return np.linspace(0.0, self.a * math.log(1e3), n)

    def marginal_inverse(self, slope):
        s = np.asarray(slope, dtype=float)
        with np.errstate(over="ignore"):
            out = self.max_rate * np.exp(-1.0 - s / self.a)
        out = np.clip(out, 0.0, self.peak_rate)
        return out if np.ndim(out) else float(out)

    def params(self):
        return {"a": self.a, "b": self.b}


@dataclass(frozen=True)
class ReciprocalTight(DemandCurve):
    """F(p) = 1 - (a/Lambda)/(p - b): p(rate) = b + a/rate, revenue a + b*rate.

    Regular but not MHR; revenue is linear in the rate, so the revenue-maximizing
    rate is the market size.
    """

    a: float
    b: float
    Lambda: float
    kind: ClassVar[str] = "reciprocal_tight"

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0 and self.Lambda > 0):
            raise DemandDomainError("reciprocal demand needs a, b, Lambda > 0")

    @property
    def max_rate(self):
        return self.Lambda

    @property
    def peak_rate(self):
        return self.Lambda

    def _rate(self, price):
        with np.errstate(divide="ignore"):
            gap = price - self.b
            return np.where(gap > self.a / self.Lambda, self.a / np.where(gap > 0, gap, 1.0), self.Lambda)

    def _price(self, rate):
        return self.b + self.a / rate

    def _price_prime(self, rate):
        return -self.a / rate**2

    def _revenue_prime(self, rate):
        return self.b + 0.0 * rate

    def _revenue_second(self, rate):
        return 0.0 * rate

    def _hazard(self, price):
        with np.errstate(divide="ignore"):
            return 1.0 / (price - self.b)

    def _tail_valuation(self, u):
        return self.b + (self.a / self.Lambda) / u

    def marginal_inverse(self, slope):
        # r' is the constant b: all-or-nothing, the lower end never exactly 0
        # because r(0+) = a > 0.
        s = np.asarray(slope, dtype=float)
        out = np.where(s <= self.b, self.Lambda, self.rate_floor)
        return out if np.ndim(out) else float(out)

    def best_response(self, shift):
        s = np.asarray(shift, dtype=float)
        out = np.where(self.b + s > 0, self.Lambda, self.rate_floor)
        return out if np.ndim(out) else float(out)

    def params(self):
        return {"a": self.a, "b": self.b, "Lambda": self.Lambda}


@dataclass(frozen=True)
class UniformValuation(DemandCurve):
    """Valuations uniform on [lo, hi] with market size Lambda."""

    lo: float
    hi: float
    Lambda: float
    kind: ClassVar[str] = "uniform"

    def __post_init__(self):
        if not (0 <= self.lo < self.hi and self.Lambda > 0):
            raise DemandDomainError("uniform valuations need 0 <= lo < hi and Lambda > 0")

    @property
    def _slope(self):
        return (self.hi - self.lo) / self.Lambda

    @property
    def max_rate(self):
        return self.Lambda

    @property
    def peak_rate(self):
        return min(self.hi / (2 * self._slope), self.Lambda)

    def _rate(self, price):
        return np.clip(self.Lambda * (self.hi - price) / (self.hi - self.lo), 0.0, self.Lambda)

    def _price(self, rate):
        return self.hi - self._slope * rate

    def _price_prime(self, rate):
        return -self._slope + 0.0 * rate

    def _revenue_prime(self, rate):
        return self.hi - 2 * self._slope * rate

    def _revenue_second(self, rate):
        return -2 * self._slope + 0.0 * rate

    def _hazard(self, price):
        with np.errstate(divide="ignore"):
            return np.where(price < self.hi, 1.0 / (self.hi - np.maximum(price, self.lo)), np.inf)

    def _tail_valuation(self, u):
        return self.hi - (self.hi - self.lo) * u

    def marginal_inverse(self, slope):
        out = np.clip((self.hi - np.asarray(slope, dtype=float)) / (2 * self._slope), 0.0, self.peak_rate)
        return out if np.ndim(out) else float(out)

    def params(self):
        return {"lo": self.lo, "hi": self.hi, "Lambda": self.Lambda}


KINDS = {cls.kind: cls for cls in (Linear, Exponential, ReciprocalTight, UniformValuation)}


def curve_from_dict(spec: dict) -> DemandCurve:
    """Build a curve from ``{"kind": ..., **params}`` (params may also be nested)."""
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind not in KINDS:
        raise DemandDomainError(f"unknown demand kind {kind!r}; expected one of {sorted(KINDS)}")
    params = spec.pop("params", None) or spec
    return KINDS[kind](**params)


# Functional aliases.
def effective_rate(curve: DemandCurve, price):
    return curve.effective_rate(price)


def inverse_price(curve: DemandCurve, rate):
    return curve.inverse_price(rate)


def revenue(curve: DemandCurve, rate):
    return curve.revenue(rate)


def revenue_prime(curve: DemandCurve, rate):
    return curve.revenue_prime(rate)


def revenue_second(curve: DemandCurve, rate):
    return curve.revenue_second(rate)


def peak_rate(curve: DemandCurve) -> float:
    return curve.peak_rate


def classify(curve: DemandCurve) -> Classification:
    return curve.classify()
