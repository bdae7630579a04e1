"""Optimal dynamic pricing for the multi-class loss system.

The continuous-time MDP is uniformized and solved by relative value iteration
on the average-reward criterion.  Because service rates in realistic instances
can differ by many orders of magnitude, plain value iteration mixes extremely
slowly; the default ``hybrid`` method interleaves the value sweeps with exact
evaluation of the current greedy policy (a sparse linear solve), which is
policy iteration in disguise and converges in a handful of rounds.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .demand import DemandCurve
from .loss_core import FullStationary, OccupancyDistribution, StateSpace, enumerate_states

log = logging.getLogger(__name__)

DIRECT_SOLVE_MAX = 5000


class UnsupportedDemandError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    def __init__(self, msg, span):
        super().__init__(msg)
        self.span = span


class PolicyShapeError(ValueError):
    pass


@dataclass(frozen=True)
class CustomerClass:
    demand: DemandCurve
    mu: float

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("service rate mu must be positive")

    @property
    def Lambda(self) -> float:
        return self.demand.max_rate

    @property
    def peak_rate(self) -> float:
        return self.demand.peak_rate


@dataclass(frozen=True)
class Instance:
    C: int
    classes: tuple

    def __post_init__(self):
        if self.C < 1:
            raise ValueError("capacity C must be >= 1")
        if len(self.classes) < 1:
            raise ValueError("need at least one customer class")
        object.__setattr__(self, "classes", tuple(self.classes))

    @property
    def M(self) -> int:
        return len(self.classes)

    @property
    def mus(self) -> np.ndarray:
        return np.array([c.mu for c in self.classes])

    @property
    def peak_rates(self) -> np.ndarray:
        return np.array([c.peak_rate for c in self.classes])

    def uniformization_rate(self) -> float:
        return float(sum(c.Lambda + self.C * c.mu for c in self.classes))

    def to_dict(self) -> dict:
        return {
            "C": self.C,
            "classes": [
                {"Lambda": c.Lambda, "mu": c.mu, "demand": c.demand.to_dict()} for c in self.classes
            ],
        }


@dataclass
class DynamicPolicy:
    """Arrival rate per (state, class); rows of full states are zero and unused."""

    space: StateSpace
    rates: np.ndarray  # (n_states, M)

    def __post_init__(self):
        self.rates = np.asarray(self.rates, dtype=float)
        if self.rates.shape != (len(self.space), self.space.M):
            raise PolicyShapeError(
                f"policy has shape {self.rates.shape}, expected {(len(self.space), self.space.M)}"
            )

    def rate(self, state, j: int) -> float:
        return float(self.rates[self.space.index(state), j])

    def class_matrix(self, j: int) -> np.ndarray:
        """Rates of class j arranged by state coordinates (needs M <= 3), NaN on full states."""
        C, M = self.space.C, self.space.M
        out = np.full((C + 1,) * M, np.nan)
        for k, x in enumerate(self.space.states):
            if x.sum() < C:
                out[tuple(x)] = self.rates[k, j]
        return out


@dataclass
class SolveReport:
    policy: DynamicPolicy
    revenue: float
    span_residual: float
    iterations: int
    evaluations: int
    values: np.ndarray = field(repr=False)
    kkt_residual: float | None = None

    def to_dict(self) -> dict:
        return {
            "revenue": self.revenue,
            "span_residual": self.span_residual,
            "iterations": self.iterations,
            "evaluations": self.evaluations,
            "kkt_residual": self.kkt_residual,
            "states": self.policy.space.states.tolist(),
            "rates": self.policy.rates.tolist(),
        }


class _Chain:
    """Transition structure of the state space, shared by solver and evaluator."""

    def __init__(self, instance: Instance):
        self.inst = instance
        self.space = enumerate_states(instance.C, instance.M)
        self.open = self.space.occupancy < instance.C
        self.up = [self.space.neighbours(j, +1) for j in range(instance.M)]
        self.down = [self.space.neighbours(j, -1) for j in range(instance.M)]
        self.dep = self.space.states * instance.mus[None, :]  # departure rate per class

    def greedy(self, h):
        """Best rates and the continuous-time Bellman increment at every state."""
        n, M = len(self.space), self.inst.M
        rates = np.zeros((n, M))
        incr = np.zeros(n)
        idx = np.nonzero(self.open)[0]
        for j, cls in enumerate(self.inst.classes):
            shift = h[self.up[j][idx]] - h[idx]
            lam = np.asarray(cls.demand.best_response(shift), dtype=float)
            rates[idx, j] = lam
            incr[idx] += cls.demand.revenue(lam) + lam * shift
            has = self.down[j] >= 0
            incr[has] += self.dep[has, j] * (h[self.down[j][has]] - h[has])
        return rates, incr

    def generator(self, rates) -> sp.csr_matrix:
        n = len(self.space)
        rows, cols, vals = [], [], []
        for j in range(self.inst.M):
            a = np.nonzero((self.up[j] >= 0) & (rates[:, j] > 0))[0]
            rows.append(a)
            cols.append(self.up[j][a])
            vals.append(rates[a, j])
            d = np.nonzero(self.down[j] >= 0)[0]
            rows.append(d)
            cols.append(self.down[j][d])
            vals.append(self.dep[d, j])
        r = np.concatenate(rows)
        c = np.concatenate(cols)
        v = np.concatenate(vals)
        Q = sp.coo_matrix((v, (r, c)), shape=(n, n)).tocsr()
        Q = Q - sp.diags(np.asarray(Q.sum(axis=1)).ravel())
        return Q.tocsr()

    def reward(self, rates) -> np.ndarray:
        out = np.zeros(len(self.space))
        for j, cls in enumerate(self.inst.classes):
            out += np.where(self.open, cls.demand.revenue(np.where(self.open, rates[:, j], 0.0)), 0.0)
        return out

    def evaluate(self, rates):
        """Gain and bias (bias at the empty state pinned to 0) of a fixed policy.

        Every state drains to the empty state through departures, so the chain
        is unichain and the system is nonsingular.
        """
        Q = self.generator(rates).tolil()
        r = self.reward(rates)
        # unknowns: (g, h_1, ..., h_{n-1}); column 0 of Q multiplies h_0 = 0
        A = Q.tocsc()
        A = A[:, 1:]
        A = sp.hstack([-np.ones((len(r), 1)), A]).tocsc()
        sol = spla.spsolve(A, -r)
        h = np.concatenate([[0.0], sol[1:]])
        return float(sol[0]), h


def _check_regular(instance: Instance):
    for j, cls in enumerate(instance.classes):
        if not cls.demand.classify().regular:
            raise UnsupportedDemandError(f"class {j} demand is not regular; the solver needs concave revenue")


def solve_dynamic(
    instance: Instance,
    tol: float = 1e-9,
    max_iter: int = 200_000,
    method: str = "hybrid",
    eval_every: int = 5,
) -> SolveReport:
    """Average-reward optimal dynamic policy.

    Stops when the span of the Bellman increment, scaled to revenue units,
    falls below ``tol * max(1, |gain|)``.  ``method="rvi"`` disables the exact
    evaluation steps.
    """
    if method not in ("hybrid", "rvi"):
        raise ValueError(f"unknown method {method!r}")
    _check_regular(instance)
    chain = _Chain(instance)
    U = instance.uniformization_rate()
    h = np.zeros(len(chain.space))
    n_eval = 0
    span = np.inf
    for it in range(1, max_iter + 1):
        rates, incr = chain.greedy(h)
        span = float(incr.max() - incr.min())
        gain = 0.5 * (incr.max() + incr.min())
        if span <= tol * max(1.0, abs(gain)):
            break
        if method == "hybrid" and it % eval_every == 1:
            _, h = chain.evaluate(rates)
            n_eval += 1
        else:
            h = h + incr / U
            h -= h[0]
    else:
        raise ConvergenceError(f"no convergence in {max_iter} iterations (span {span:.3g})", span)
    log.debug("solve_dynamic: %d iterations, %d evaluations, gain %.10g", it, n_eval, gain)
    policy = DynamicPolicy(chain.space, rates)
    report = SolveReport(policy, gain, span, it, n_eval, h)
    if instance.M == 1:
        report.kkt_residual = kkt_residual_1class(instance, report).relative
    return report


def stationary_of_policy(instance: Instance, policy: DynamicPolicy, tol: float = 1e-12) -> FullStationary:
    """Stationary law of the CTMC induced by ``policy``.

    States unreachable from the empty state (possible when some rates are 0)
    get probability 0 and the result is flagged ``restricted``.
    """
    chain = _Chain(instance)
    if policy.rates.shape != (len(chain.space), instance.M):
        raise PolicyShapeError("policy does not match the instance's state space")
    Q = chain.generator(policy.rates)
    # reachable set from the empty state
    reach = np.zeros(len(chain.space), dtype=bool)
    reach[0] = True
    frontier = [0]
    Qc = Q.tocsr()
    while frontier:
        nxt = []
        for s in frontier:
            row = Qc.indices[Qc.indptr[s] : Qc.indptr[s + 1]]
            vals = Qc.data[Qc.indptr[s] : Qc.indptr[s + 1]]
            for t, v in zip(row, vals):
                if v > 0 and not reach[t]:
                    reach[t] = True
                    nxt.append(t)
        frontier = nxt
    idx = np.nonzero(reach)[0]
    Qr = Qc[idx][:, idx].tocsc()
    k = len(idx)
    if k <= DIRECT_SOLVE_MAX:
        # pi Q = 0 with the last balance equation swapped for normalization
        A = Qr.T.tolil()
        A[k - 1, :] = np.ones(k)
        rhs = np.zeros(k)
        rhs[-1] = 1.0
        pi = spla.spsolve(A.tocsc(), rhs)
    else:
        U = instance.uniformization_rate()
        P = (sp.identity(k) + Qr / U).T.tocsr()
        pi = np.full(k, 1.0 / k)
        for _ in range(10_000_000):
            new = P @ pi
            new /= new.sum()
            if np.max(np.abs(new - pi)) <= tol:
                pi = new
                break
            pi = new
    pi = np.maximum(pi, 0.0)
    pi /= pi.sum()
    probs = np.zeros(len(chain.space))
    probs[idx] = pi
    return FullStationary(chain.space, probs, restricted=bool(k < len(chain.space)))


def revenue_of_policy(instance: Instance, policy: DynamicPolicy, stationary: FullStationary) -> float:
    open_ = policy.space.occupancy < instance.C
    total = 0.0
    for j, cls in enumerate(instance.classes):
        rev = cls.demand.revenue(np.where(open_, policy.rates[:, j], 0.0))
        total += float(np.sum(np.where(open_, rev, 0.0) * stationary.probs))
    return total


@dataclass
class KKTResult:
    absolute: float
    relative: float
    per_j: np.ndarray
    boundary: bool
    omega: np.ndarray
    gamma: np.ndarray


def single_class_rates(instance: Instance, policy: DynamicPolicy) -> np.ndarray:
    """Rates by occupancy 0..C-1 for a one-class policy."""
    if instance.M != 1:
        raise ValueError("single-class helper needs M = 1")
    return policy.rates[: instance.C, 0].copy()


def kkt_residual_1class(instance: Instance, report: SolveReport) -> KKTResult:
    """Violation of the first-order optimality conditions of a one-class policy.

    With omega_j = rate_j/mu and gamma_j = -p'(rate_j), and omega_C = 0, checks
    (j+1)(gamma_j omega_j - p_j/mu) = gamma_{j+1} omega_{j+1}^2 - gamma_0 omega_0^2.
    The relative residual divides by the largest term magnitude.  Boundary
    policies (a rate at 0 or at the peak rate) get the ``boundary`` flag since
    the equalities need not hold there.
    """
    if instance.M != 1:
        raise ValueError("KKT check is for single-class instances")
    cls = instance.classes[0]
    mu, C = cls.mu, instance.C
    lam = single_class_rates(instance, report.policy)
    peak = cls.peak_rate
    boundary = bool(np.any(lam <= cls.demand.rate_floor * 10) or np.any(lam >= peak * (1 - 1e-9)))
    lam_eval = np.maximum(lam, cls.demand.rate_floor)
    omega = np.append(lam / mu, 0.0)
    gamma = np.append(-np.asarray(cls.demand.price_prime(lam_eval)), 0.0)
    price = np.asarray(cls.demand.inverse_price(lam_eval))
    j = np.arange(C)
    lhs = (j + 1) * (gamma[:C] * omega[:C] - price / mu)
    rhs = gamma[1:] * omega[1:] ** 2 - gamma[0] * omega[0] ** 2
    per_j = np.abs(lhs - rhs)
    scale = max(np.max(np.abs(lhs)), np.max(np.abs(rhs)), 1e-300)
    return KKTResult(
        absolute=float(per_j.max()),
        relative=float(per_j.max() / scale),
        per_j=per_j,
        boundary=boundary,
        omega=omega[:C],
        gamma=gamma[:C],
    )


def one_class_reduction(instance: Instance, policy: DynamicPolicy, stationary: FullStationary):
    """Occupancy-level birth rates and per-unit death rates of a multi-class chain.

    Level k gets the probability-weighted mean total arrival rate and the mean
    per-unit service rate over states with k busy units.  The one-class chain
    with these rates has the same occupancy law as the multi-class chain.
    """
    C = instance.C
    occ = policy.space.occupancy
    P = stationary.probs
    births = np.zeros(C)
    unit_death = np.zeros(C)
    for k in range(C + 1):
        sel = occ == k
        pk = P[sel].sum()
        if pk <= 0:
            continue
        if k < C:
            births[k] = float((policy.rates[sel].sum(axis=1) * P[sel]).sum() / pk)
        if k > 0:
            unit_death[k - 1] = float(((policy.space.states[sel] * instance.mus).sum(axis=1) * P[sel]).sum() / (k * pk))
    return births, unit_death
