import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reusable_pricing.demand import (
    DemandDomainError,
    Exponential,
    Linear,
    ReciprocalTight,
    Classification,
    UniformValuation,
    curve_from_dict,
)

CURVES = [
    Linear(a=1.0, b=1.0),
    Linear(a=0.05, b=180.0),
    Exponential(a=1.0, b=math.e),
    Exponential(a=2.5, b=7.0),
    ReciprocalTight(a=1.0, b=3.0, Lambda=10.0),
    UniformValuation(lo=2.0, hi=5.0, Lambda=4.0),
]


def test_effective_rate_examples():
    lin = Linear(a=1.0, b=1.0)
    assert lin.effective_rate(math.inf) == 0.0
    assert lin.effective_rate(0.5) == pytest.approx(0.5)
    assert ReciprocalTight(a=1.0, b=3.0, Lambda=10.0).effective_rate(4.0) == pytest.approx(1.0)


def test_reciprocal_rate_matches_bisection_on_tail():
    c = ReciprocalTight(a=1.0, b=3.0, Lambda=10.0)
    # find p with Lambda * P(V >= p) = 1 by bisection on the tail (a/Lambda)/(p - b)
    lo, hi = 3.1, 100.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if c.Lambda * (c.a / c.Lambda) / (mid - c.b) > 1.0:
            lo = mid
        else:
            hi = mid
    assert c.inverse_price(1.0) == pytest.approx(0.5 * (lo + hi), abs=1e-10)


def test_inverse_price_examples():
    assert Linear(a=1.0, b=1.0).inverse_price(0.5) == pytest.approx(0.5)
    assert Exponential(a=1.0, b=math.e).inverse_price(1.0) == pytest.approx(1.0)
    assert ReciprocalTight(a=1.0, b=3.0, Lambda=10.0).inverse_price(1.0) == pytest.approx(4.0)


def test_revenue_examples():
    lin = Linear(a=1.0, b=1.0)
    assert lin.revenue(0.5) == pytest.approx(0.25)
    assert lin.revenue_prime(0.5) == pytest.approx(0.0, abs=1e-15)
    assert lin.revenue(0.25) == pytest.approx(0.1875)
    rt = ReciprocalTight(a=1.0, b=3.0, Lambda=10.0)
    assert rt.revenue(2.0) == pytest.approx(7.0)
    assert rt.revenue_second(2.0) == 0.0
    for c in CURVES:
        assert c.revenue(0.0) == 0.0


def test_peak_rate_examples():
    assert Linear(a=1.0, b=1.0).peak_rate == pytest.approx(0.5)
    e = Exponential(a=1.0, b=math.e)
    assert e.peak_rate == pytest.approx(1.0)
    grid = np.linspace(1e-4, e.max_rate, 100_001)
    assert grid[np.argmax(e.revenue(grid))] == pytest.approx(1.0, abs=1e-4)
    assert ReciprocalTight(a=1.0, b=3.0, Lambda=10.0).peak_rate == 10.0


def test_classify():
    assert Linear(a=1.0, b=1.0).classify() == Classification(regular=True, mhr=True)
    rt = ReciprocalTight(a=1.0, b=3.0, Lambda=10.0).classify()
    assert rt.regular and not rt.mhr
    ex = Exponential(a=1.0, b=2.0).classify()
    assert ex.regular and ex.mhr
    assert UniformValuation(lo=2.0, hi=5.0, Lambda=4.0).classify().mhr


@pytest.mark.parametrize("curve", CURVES, ids=lambda c: c.kind)
def test_round_trip_rate_price(curve):
    rates = np.linspace(0.01, 0.99, 50) * curve.max_rate
    back = curve.effective_rate(curve.inverse_price(rates))
    np.testing.assert_allclose(back, rates, rtol=1e-10)


@pytest.mark.parametrize("curve", CURVES, ids=lambda c: c.kind)
def test_derivatives_match_finite_differences(curve):
    for x in np.linspace(0.1, 0.9, 9) * curve.max_rate:
        h = 1e-6 * curve.max_rate
        fd1 = (curve.revenue(x + h) - curve.revenue(x - h)) / (2 * h)
        assert curve.revenue_prime(x) == pytest.approx(fd1, rel=1e-6, abs=1e-8 * max(1.0, abs(fd1)))
        fdp = (curve.inverse_price(x + h) - curve.inverse_price(x - h)) / (2 * h)
        assert curve.price_prime(x) == pytest.approx(fdp, rel=1e-5)


@pytest.mark.parametrize("curve", CURVES, ids=lambda c: c.kind)
def test_domain_errors(curve):
    with pytest.raises(DemandDomainError):
        curve.inverse_price(0.0)
    with pytest.raises(DemandDomainError):
        curve.inverse_price(curve.max_rate * 1.01)
    with pytest.raises(DemandDomainError):
        curve.effective_rate(-1.0)


def test_exponential_clamps_near_zero():
    e = Exponential(a=1.0, b=2.0)
    tiny = e.rate_floor / 10
    assert np.isfinite(e.revenue(tiny))
    assert e.revenue(tiny) < 1e-9


@pytest.mark.parametrize("curve", CURVES, ids=lambda c: c.kind)
def test_best_response_maximizes(curve):
    grid = np.linspace(0.0, curve.peak_rate, 20001)
    for shift in (-0.7 * abs(curve.revenue_prime(0.3 * curve.max_rate)), 0.0, 0.5):
        x = curve.best_response(shift)
        obj = lambda r: curve.revenue(r) + r * shift
        assert obj(x) >= np.max(obj(grid)) - 1e-9 * max(1.0, curve.revenue(curve.peak_rate))


@pytest.mark.parametrize("curve", CURVES, ids=lambda c: c.kind)
def test_dict_round_trip(curve):
    assert curve_from_dict(curve.to_dict()) == curve


@pytest.mark.parametrize("curve", CURVES[:4], ids=lambda c: c.kind)
def test_conditioned_valuations(curve):
    rng = np.random.default_rng(1)
    v = curve.sample_valuations(rng, 200_000, min_rate=0.4 * curve.max_rate)
    p_cut = curve.inverse_price(0.4 * curve.max_rate)
    assert np.all(v >= p_cut - 1e-12)
    p_mid = curve.inverse_price(0.2 * curve.max_rate)
    # half of the conditioned customers also clear the price for half the rate
    assert np.mean(v >= p_mid) == pytest.approx(0.5, abs=0.01)


@settings(max_examples=200, deadline=None)
@given(
    a=st.floats(0.05, 20.0),
    b=st.floats(0.5, 200.0),
    frac=st.floats(1e-6, 1.0),
    kind=st.sampled_from(["linear", "exponential"]),
)
def test_round_trip_property(a, b, frac, kind):
    curve = Linear(a, b) if kind == "linear" else Exponential(a, b)
    rate = frac * curve.max_rate
    assert curve.effective_rate(curve.inverse_price(rate)) == pytest.approx(rate, rel=1e-10, abs=1e-12 * curve.max_rate)
