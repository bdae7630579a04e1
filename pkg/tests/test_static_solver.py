import numpy as np
import pytest

from reusable_pricing.config import example_path, load_instance
from reusable_pricing.demand import Exponential, Linear
from reusable_pricing.dynamic_solver import CustomerClass, DynamicPolicy, Instance, solve_dynamic, stationary_of_policy
from reusable_pricing.experiments import random_instance
from reusable_pricing.loss_core import enumerate_states, erlang_b, guarantee_G
from reusable_pricing.static_solver import (
    DegeneratePolicyError,
    constructed_static,
    fluid_heuristic,
    fluid_sweep,
    lipschitz_bound,
    one_class_equivalent,
    optimal_static,
    static_gradient,
    static_gradient_product_form,
    static_revenue,
)


def one_class(C, curve, mu):
    return Instance(C, (CustomerClass(curve, mu),))


def random_regular(rng, M, C):
    cls = []
    for _ in range(M):
        a, b, mu = rng.uniform(0.1, 5.0), rng.uniform(0.5, 10.0), rng.uniform(0.05, 20.0)
        curve = Linear(a, b) if rng.random() < 0.5 else Exponential(a, b)
        cls.append(CustomerClass(curve, mu))
    return Instance(C, tuple(cls))


def test_static_revenue_examples():
    inst = one_class(1, Linear(1.0, 2.0), 0.5)
    assert static_revenue(inst, [0.0]) == 0.0
    lam = 0.7
    assert static_revenue(inst, [lam]) == pytest.approx(lam * (2 - lam) / (1 + lam / 0.5), rel=1e-13)


def test_gradient_matches_finite_differences_and_product_form():
    rng = np.random.default_rng(21)
    for _ in range(10):
        inst = random_regular(rng, int(rng.integers(1, 4)), int(rng.integers(2, 6)))
        x = rng.uniform(0.05, 0.95, inst.M) * inst.peak_rates
        g = static_gradient(inst, x)
        fd = np.empty(inst.M)
        for j in range(inst.M):
            h = 1e-6 * inst.peak_rates[j]
            e = np.zeros(inst.M)
            e[j] = h
            fd[j] = (static_revenue(inst, x + e) - static_revenue(inst, x - e)) / (2 * h)
        np.testing.assert_allclose(g, fd, rtol=1e-5, atol=1e-9 * np.abs(g).max())
        np.testing.assert_allclose(static_gradient_product_form(inst, x), g, rtol=1e-9, atol=1e-12)


def test_constructed_from_constant_policy():
    inst = Instance(2, (CustomerClass(Linear(1.0, 3.0), 1.0), CustomerClass(Linear(2.0, 5.0), 3.0)))
    space = enumerate_states(2, 2)
    rates = np.tile([0.4, 1.1], (len(space), 1))
    rates[space.occupancy == 2] = 0.0
    pol = DynamicPolicy(space, rates)
    st = stationary_of_policy(inst, pol)
    np.testing.assert_allclose(constructed_static(inst, pol, st).rates, [0.4, 1.1], rtol=1e-12)


def test_constructed_degenerate():
    inst = one_class(1, Linear(1.0, 1.0), 1.0)
    pol = DynamicPolicy(enumerate_states(1, 1), np.array([[0.5], [0.0]]))
    st = stationary_of_policy(inst, pol)
    st.probs[:] = [0.0, 1.0]
    with pytest.raises(DegeneratePolicyError):
        constructed_static(inst, pol, st)


def test_tight_instance_constructed_policy():
    from reusable_pricing.demand import ReciprocalTight

    mu = 1e-4
    inst = one_class(3, ReciprocalTight(1.0, 1.0, 10.0), mu)
    rep = solve_dynamic(inst)
    st = stationary_of_policy(inst, rep.policy)
    # optimal rates (L, L, ~0): the conditional average puts weight (1, w, w^2/2) on them
    w = 10.0 / mu
    expected = 10.0 * (1 + w) / (1 + w + w * w / 2)
    assert constructed_static(inst, rep.policy, st).rates[0] == pytest.approx(expected, rel=1e-6)


def test_optimal_static_capacity_never_binds():
    inst = one_class(2, Linear(1.0, 1.0), 1e6)
    assert optimal_static(inst).policy.rates[0] == pytest.approx(0.5, abs=1e-5)


def test_optimal_static_grid_oracle():
    inst = one_class(2, Linear(1.0, 5.7), 1.0)
    lam = np.linspace(0.0, inst.peak_rates[0], 1_000_001)
    rho = lam
    oracle = np.max(lam * (5.7 - lam) * (1 - erlang_b(2, rho)))
    rep = optimal_static(inst)
    assert rep.revenue == pytest.approx(oracle, abs=1e-5)
    assert rep.revenue >= oracle - 1e-12


def test_optimal_static_example():
    inst = load_instance(example_path()).instance
    rep = optimal_static(inst)
    np.testing.assert_allclose(rep.policy.rates, [0.00194, 0.10999], atol=1e-4)
    assert rep.revenue == pytest.approx(0.76189, abs=1e-4)


def test_multistart_agreement():
    rng = np.random.default_rng(22)
    for i in range(50):
        inst = random_regular(rng, int(rng.integers(1, 4)), int(rng.integers(1, 6)))
        rep = optimal_static(inst, starts=5, seed=i)
        for p in rep.start_points:
            assert np.max(np.abs(p - rep.policy.rates) / inst.peak_rates) <= 1e-6
        assert lipschitz_bound(inst) > 0


def _guarantee_check(inst):
    dyn = solve_dynamic(inst)
    st = stationary_of_policy(inst, dyn.policy)
    tilde = constructed_static(inst, dyn.policy, st)
    r_tilde = static_revenue(inst, tilde)
    ratio = r_tilde / dyn.revenue
    assert ratio >= guarantee_G(inst.C).value - 1e-6
    # revenue ratio dominates the service-level ratio
    alpha_dyn = st.aggregate().alpha
    alpha_tilde = 1 - erlang_b(inst.C, float(np.sum(tilde.rates / inst.mus)))
    assert ratio >= alpha_tilde / alpha_dyn - 1e-9
    return dyn, tilde, r_tilde


def test_guarantee_floor_one_class():
    rng = np.random.default_rng(23)
    for i in range(50):
        C = [2, 3, 4][i % 3]
        _guarantee_check(random_regular(rng, 1, C))


def test_guarantee_floor_two_class():
    rng = np.random.default_rng(24)
    for i in range(20):
        C = [2, 3, 4][i % 3]
        inst = random_regular(rng, 2, C)
        dyn, tilde, r_tilde = _guarantee_check(inst)
        opt = optimal_static(inst, extra_starts=[tilde.rates])
        assert r_tilde <= opt.revenue + 1e-10
        assert opt.revenue <= dyn.revenue * (1 + 1e-8)


def test_one_class_equivalent():
    inst = Instance(3, (CustomerClass(Linear(1.0, 3.0), 2.0), CustomerClass(Linear(1.0, 4.0), 0.5)))
    lam_hat, mu_hat = one_class_equivalent(inst, [1.0, 0.5])
    assert lam_hat == pytest.approx(1.5)
    assert lam_hat / mu_hat == pytest.approx(1.0 / 2.0 + 0.5 / 0.5)
    with pytest.raises(DegeneratePolicyError):
        one_class_equivalent(inst, [0.0, 0.0])


def test_fluid_examples():
    inst = one_class(1, Linear(1.0, 1.0), 1.0)
    res = fluid_heuristic(inst, 0.25)
    assert res.policy.rates[0] == pytest.approx(0.25, abs=1e-9)
    assert res.theta == pytest.approx(0.5, abs=1e-9)
    assert res.binding
    assert np.all(fluid_heuristic(inst, 0.0).policy.rates == 0.0)
    slack = fluid_heuristic(inst, 10.0)
    assert not slack.binding and slack.policy.rates[0] == pytest.approx(0.5)


def test_fluid_feasible_and_optimal_on_random_instances():
    rng = np.random.default_rng(25)
    for _ in range(10):
        inst = random_regular(rng, 3, 4)
        for delta in (0.3, 1.0, 4.0):
            res = fluid_heuristic(inst, delta)
            lam = res.policy.rates
            assert np.all(lam >= 0) and np.all(lam <= inst.peak_rates * (1 + 1e-12))
            assert np.sum(lam / inst.mus) <= delta * (1 + 1e-9)
            # no random feasible point does better on total revenue
            best = sum(c.demand.revenue(x) for c, x in zip(inst.classes, lam))
            for _ in range(200):
                y = rng.uniform(0, 1, 3) * inst.peak_rates
                load = np.sum(y / inst.mus)
                if load > delta:
                    y *= delta / load
                val = sum(c.demand.revenue(x) for c, x in zip(inst.classes, y))
                assert val <= best + 1e-9 * max(1.0, best)


def test_fluid_sweep():
    inst = one_class(3, Linear(1.0, 1.0), 10.0)
    sw = fluid_sweep(inst)
    # unconstrained optimum fits within capacity
    assert sw.best_policy.rates[0] == pytest.approx(0.5)
    inst = random_instance(5, 5, 7)
    sw = fluid_sweep(inst)
    at_C = static_revenue(inst, fluid_heuristic(inst, 5.0).policy)
    assert sw.best_revenue >= at_C - 1e-9
    assert len(sw.deltas) == 100 and sw.deltas[-1] == 15.0
