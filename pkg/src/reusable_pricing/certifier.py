"""Universal lower bounds on the static/dynamic revenue ratio for MHR valuations.

For capacities 3..47 the ratio is bounded below by a three-way case split on
the static load w = static rate / mu:

* w < C - 2.7 and w > C + 3 have closed-form bounds;
* in between, the worst case is a 4-variable non-convex problem over
  (w0, wa, wb, wl) = (omega_0, omega_{C-3}, omega_{C-2}, omega_{C-1}), bounded
  below by evaluating corner values on a grid of small boxes.

Capacities from 48 up are covered by the regular-valuation guarantee, which
increases in C.  C = 2 has its own closed-form bounds.

Box search: each box's value uses the lower corner for the service level and
the upper corner for the conditional mean occupancy, which lower-bounds the
objective on the box.  ``certify_box`` can skip boxes exactly: coarse parent
boxes get a bound that is below every child's value, and children are only
evaluated for parents whose bound is below the running minimum.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .loss_core import guarantee_G, service_level

C_MIN, C_MAX = 3, 47
CASE1_SHIFT = 2.7
CASE2_SHIFT = 3.0
DEFAULT_N = 500
BATCH_BOXES = 200_000


class CertifierDomainError(ValueError):
    pass


@dataclass
class Certificate:
    C: int
    method: str
    lower_bound: float
    grid_N: int | None = None
    argmin_box: tuple | None = None
    runtime: float = 0.0
    boxes_evaluated: int = 0
    cases: dict = field(default_factory=dict)

    def to_dict(self):
        d = asdict(self)
        if d["argmin_box"] is not None:
            d["argmin_box"] = [float(v) for v in d["argmin_box"]]
        return d


def _check_C(C):
    if not (C_MIN <= C <= C_MAX):
        raise CertifierDomainError(f"C must lie in [{C_MIN}, {C_MAX}], got {C}")


def _service_level_at(C: int, w: float) -> float:
    return service_level(C, w)


def closed_form_case1(C: int) -> float:
    """Bound when the static load is below C - 2.7: the Erlang service level at C - 2.7."""
    _check_C(C)
    return _service_level_at(C, C - CASE1_SHIFT)


def closed_form_case2(C: int) -> float:
    """Bound when the static load exceeds C + 3: (1 + 4/C) times the service level at C + 3."""
    _check_C(C)
    return (1.0 + (CASE2_SHIFT + 1) / C) * _service_level_at(C, C + CASE2_SHIFT)


def case2_kernel(C: int, w):
    """(w + 1)/C times the Erlang service level at load w; increasing in w."""
    w = np.asarray(w, dtype=float)
    return (w + 1.0) / C * (service_level(C, w))


# --- worst-case service level and occupancy as functions of a few rates ----


def alpha_reduced(C, w0, wa, wb, wl):
    """Service level of the birth-death chain with load sequence
    (w0, wa, ..., wa, wb, wl): w0 at state 0, wa up to state C-3, then wb, wl.
    """
    w0, wa, wb, wl = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (w0, wa, wb, wl)))
    t = w0.copy()  # weight of state 1
    open_sum = 1.0 + t
    for i in range(2, C - 1):
        t = t * wa / i
        open_sum = open_sum + t
    t = t * wb / (C - 1)
    open_sum = open_sum + t
    full = t * wl / C
    return open_sum / (open_sum + full)


def beta_reduced(C, w0, wa, wb):
    """Mean occupancy given not full, for the load sequence (w0, ..., w0, wa, wb)."""
    w0, wa, wb = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (w0, wa, wb)))
    u = np.ones_like(w0)
    den = u.copy()
    num = np.zeros_like(w0)
    for i in range(1, C - 2):
        u = u * w0 / i
        den = den + u
        num = num + i * u
    d1 = u * wa / (C - 2)
    d2 = d1 * wb / (C - 1)
    return (num + (C - 2) * d1 + (C - 1) * d2) / (den + d1 + d2)


def ratio_from_levels(C, alpha, beta):
    w = C * (1.0 / alpha - 1.0) + beta
    return (service_level(C, w)) / alpha


def lowest_wl(C, w0_lo, wa_lo, wb_lo, wb_hi):
    """Smallest admissible omega_{C-1} over a box (uses the upper wb in the second term)."""
    f1 = (C * (C - 1) * wb_lo + w0_lo * wb_lo) / (C * wb_lo + C * (C - 1))
    f2 = wa_lo * (1.0 + 2.0 * w0_lo / (C * (C - 2)) - wb_hi / (C - 2))
    return np.minimum(np.maximum(f1, f2), wb_lo)


def objective_R3(C, w0, wa, wb, wl):
    """Reduced worst-case ratio at a point; for C = 3 pass wa = w0."""
    return ratio_from_levels(C, alpha_reduced(C, w0, wa, wb, wl), beta_reduced(C, w0, wa, wb))


def feasible_region_mask(C, w0, wa, wb, wl):
    """Membership in the reduced problem's feasible set (with box), at points."""
    lo0, hi = C - CASE1_SHIFT, (C + CASE2_SHIFT) * C
    lo1 = 2 * (C - CASE1_SHIFT) / C
    ok = (w0 >= wa) & (wa >= wb) & (wb >= wl)
    ok &= np.minimum(C / 2 * wb, C / 3 * wa) >= w0
    ok &= wl / wb + wl / (C - 1) >= w0 / (C * (C - 1)) + 1
    ok &= wl / wa + wb / (C - 2) >= 2 * w0 / (C * (C - 2)) + 1
    if C == 3:
        ok &= (w0 >= 0.3) & (w0 <= 18) & (wb >= 0.2) & (wb <= 18)
    else:
        ok &= (w0 >= lo0) & (w0 <= hi) & (wa >= lo1) & (wa <= hi) & (wb >= lo1) & (wb <= hi)
    return ok


def box_domain(C: int):
    """Bounds of the search box: (w0 range, range shared by wa and wb)."""
    if C == 3:
        return (0.3, 18.0), (0.2, 18.0)
    return (C - CASE1_SHIFT, (C + CASE2_SHIFT) * C), (2 * (C - CASE1_SHIFT) / C, (C + CASE2_SHIFT) * C)


def _keep(C, w0l, w0h, wal, wah, wbl, wbh):
    # conservative: keep a box if some point in it can meet the ordering constraints
    return (C / 2 * wbh >= w0l) & (C / 3 * wah >= w0l) & (w0h >= wal) & (wah >= wbl)


def _box_values(C, w0l, w0h, wal, wah, wbl, wbh):
    """Lower bound of the reduced ratio on each box (inf for pruned boxes)."""
    keep = _keep(C, w0l, w0h, wal, wah, wbl, wbh)
    v = np.full(np.shape(keep), np.inf)
    if not np.any(keep):
        return v
    a = [np.broadcast_to(x, keep.shape)[keep] for x in (w0l, w0h, wal, wah, wbl, wbh)]
    wl = lowest_wl(C, a[0], a[2], a[4], a[5])
    al = alpha_reduced(C, a[0], a[2], a[4], wl)
    be = beta_reduced(C, a[1], a[3], a[5])
    v[keep] = ratio_from_levels(C, al, be)
    return v


def _parent_bounds(C, w0l, w0h, wal, wah, wbl, wbh):
    """A value below every sub-box value of each box.

    Sub-boxes have service level between the box's lower-corner value and the
    value at the upper corner (the service level falls in every rate), and
    occupancy at most the box's upper-corner value.  The ratio is quasi-concave
    in the service level and non-increasing in occupancy, so the min over the
    two service-level endpoints bounds all sub-boxes.
    """
    keep = _keep(C, w0l, w0h, wal, wah, wbl, wbh)
    lb = np.full(np.shape(keep), np.inf)
    if not np.any(keep):
        return lb
    a = [np.broadcast_to(x, keep.shape)[keep] for x in (w0l, w0h, wal, wah, wbl, wbh)]
    wl = lowest_wl(C, a[0], a[2], a[4], a[5])
    be = beta_reduced(C, a[1], a[3], a[5])
    a_hi = alpha_reduced(C, a[0], a[2], a[4], wl)
    a_lo = alpha_reduced(C, a[1], a[3], a[5], a[5])
    lb[keep] = np.minimum(ratio_from_levels(C, a_hi, be), ratio_from_levels(C, a_lo, be))
    return lb


def _grids(C, N):
    (l0, h0), (l1, h1) = box_domain(C)
    return np.linspace(l0, h0, N + 1), np.linspace(l1, h1, N + 1)


def _bruteforce(C, N):
    g0, g1 = _grids(C, N)
    best, arg, count = np.inf, None, 0
    for i in range(N):
        a0, b0 = g0[i], g0[i + 1]
        if C == 3:
            wal, wah = a0, b0
            wbl, wbh = g1[:-1], g1[1:]
        else:
            wal, wbl = np.meshgrid(g1[:-1], g1[:-1], indexing="ij")
            wah, wbh = np.meshgrid(g1[1:], g1[1:], indexing="ij")
        v = _box_values(C, a0, b0, wal, wah, wbl, wbh)
        count += int(np.isfinite(v).sum())
        k = int(np.argmin(v))
        if v.flat[k] < best:
            best = float(v.flat[k])
            arg = (a0, float(np.broadcast_to(wal, v.shape).flat[k]), float(np.broadcast_to(wbl, v.shape).flat[k]))
    return best, arg, count


def _coarse_factor(N):
    for k in (10, 8, 5, 4, 2):
        if N % k == 0 and N // k >= 5:
            return k
    return 1


def _screened(C, N, k):
    """Exact minimum over the fine grid, skipping coarse boxes that cannot hold it."""
    g0, g1 = _grids(C, N)
    c0, c1 = g0[::k], g1[::k]
    Nc = N // k
    dims = 2 if C == 3 else 3
    if dims == 2:
        I, K = np.meshgrid(np.arange(Nc), np.arange(Nc), indexing="ij")
        I, K = I.ravel(), K.ravel()
        lb = _parent_bounds(C, c0[I], c0[I + 1], c0[I], c0[I + 1], c1[K], c1[K + 1])
        J = I
    else:
        I, J, K = (x.ravel() for x in np.meshgrid(np.arange(Nc), np.arange(Nc), np.arange(Nc), indexing="ij"))
        lb = _parent_bounds(C, c0[I], c0[I + 1], c1[J], c1[J + 1], c1[K], c1[K + 1])
    order = np.argsort(lb, kind="stable")
    order = order[np.isfinite(lb[order])]
    sub = np.arange(k)
    if dims == 2:
        di, dk = (x.ravel() for x in np.meshgrid(sub, sub, indexing="ij"))
        dj = di
    else:
        di, dj, dk = (x.ravel() for x in np.meshgrid(sub, sub, sub, indexing="ij"))
    per_parent = len(di)
    batch = max(1, BATCH_BOXES // per_parent)
    best, arg, count = np.inf, None, 0
    pos = 0
    while pos < len(order) and lb[order[pos]] < best:
        chunk = order[pos : pos + batch]
        chunk = chunk[lb[chunk] < best]
        pos += batch
        fi = (I[chunk, None] * k + di[None, :]).ravel()
        fk = (K[chunk, None] * k + dk[None, :]).ravel()
        if dims == 2:
            v = _box_values(C, g0[fi], g0[fi + 1], g0[fi], g0[fi + 1], g1[fk], g1[fk + 1])
            fa = g0[fi]
        else:
            fj = (J[chunk, None] * k + dj[None, :]).ravel()
            v = _box_values(C, g0[fi], g0[fi + 1], g1[fj], g1[fj + 1], g1[fk], g1[fk + 1])
            fa = g1[fj]
        count += int(np.isfinite(v).sum())
        m = int(np.argmin(v))
        if v[m] < best:
            best = float(v[m])
            arg = (float(g0[fi[m]]), float(fa[m]), float(g1[fk[m]]))
    return best, arg, count


def certify_box(C: int, N: int = DEFAULT_N, screen: bool = True) -> Certificate:
    """Grid lower bound on the worst-case ratio in the middle case.

    ``screen=False`` evaluates every box; the default skips whole coarse boxes
    whose bound already exceeds the running minimum, which returns the same
    value.
    """
    _check_C(C)
    if N < 10:
        raise CertifierDomainError("grid resolution N must be >= 10")
    t0 = time.perf_counter()
    k = _coarse_factor(N) if screen else 1
    if k > 1:
        best, arg, count = _screened(C, N, k)
    else:
        best, arg, count = _bruteforce(C, N)
    if not np.isfinite(best):
        raise RuntimeError(f"no feasible box for C={C}")
    return Certificate(
        C=C,
        method="box_bruteforce",
        lower_bound=best,
        grid_N=N,
        argmin_box=arg,
        runtime=time.perf_counter() - t0,
        boxes_evaluated=count,
    )


def combined_bound(C: int, N: int = DEFAULT_N) -> Certificate:
    """Per-capacity bound: the weakest of the three cases."""
    box = certify_box(C, N)
    cases = {"case1": closed_form_case1(C), "case2": closed_form_case2(C), "box": box.lower_bound}
    box.cases = cases
    box.lower_bound = min(cases.values())
    box.method = min(cases, key=cases.get)
    return box


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("REPL_THREADS", "1")))
    except ValueError:
        return 1


@dataclass
class MHRGuarantee:
    overall: float
    argmin_C: int | None
    per_C: list
    tail: float
    grid_N: int
    runtime: float

    def to_dict(self):
        return {
            "overall": self.overall,
            "argmin_C": self.argmin_C,
            "tail_G48": self.tail,
            "grid_N": self.grid_N,
            "runtime_s": self.runtime,
            "per_C": [c.to_dict() for c in self.per_C],
        }


def mhr_guarantee(N: int = DEFAULT_N, C_values=None, workers: int | None = None) -> MHRGuarantee:
    """Combined guarantee for MHR valuations: min over C = 3..47 and the C >= 48 tail."""
    t0 = time.perf_counter()
    Cs = list(range(C_MIN, C_MAX + 1)) if C_values is None else list(C_values)
    workers = workers or _workers()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            per = list(ex.map(combined_bound, Cs, [N] * len(Cs)))
    else:
        per = [combined_bound(C, N) for C in Cs]
    tail = guarantee_G(C_MAX + 1).value
    k = int(np.argmin([c.lower_bound for c in per]))
    overall = min(per[k].lower_bound, tail)
    argmin_C = per[k].C if per[k].lower_bound <= tail else None
    return MHRGuarantee(overall, argmin_C, per, tail, N, time.perf_counter() - t0)


# --- C = 2 -------------------------------------------------------------------


def c2_mhr_ratio(w0):
    """Worst-case service-level ratio at C = 2 as a function of omega_0."""
    w = np.asarray(w0, dtype=float)
    num = np.polyval([1, 12, 50, 90, 84, 40, 8], w)
    den = np.polyval([1, 12, 52, 92, 84, 40, 8], w)
    return num / den


def c2_linear_ratio(w0):
    """Revenue ratio at C = 2 with linear demand, with omega_1 eliminated by optimality."""
    w = np.asarray(w0, dtype=float)
    s = np.sqrt(2 * w**2 + 8 * w + 4)
    num = (w + 2) * np.sqrt(w**2 + 4 * w + 2) * (w**2 - w - 2 + s) * (2 * w + 2 + w * s)
    den = np.sqrt(2) * w * (1 + w) * (w**4 + 4 * w**3 + 6 * w**2 + 8 * w + 4 + 2 * w**2 * s + 2 * w * s)
    return num / den


def c2_linear_omega1(w0):
    return np.sqrt(np.asarray(w0, dtype=float) ** 2 / 2 + 2 * w0 + 1) - 1


def _golden_min(f, lo, hi, iters=200):
    """Golden-section on a log scale, then a few Newton steps on a central-difference derivative."""
    gr = (math.sqrt(5) - 1) / 2
    a, b = math.log(lo), math.log(hi)
    g = lambda u: float(f(math.exp(u)))
    # coarse scan picks the basin so the unimodal search starts in the right place
    us = np.linspace(a, b, 2001)
    vals = [g(u) for u in us]
    j = int(np.argmin(vals))
    a, b = us[max(j - 1, 0)], us[min(j + 1, len(us) - 1)]
    c, d = b - gr * (b - a), a + gr * (b - a)
    fc, fd = g(c), g(d)
    for _ in range(iters):
        if b - a < 1e-15:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - gr * (b - a)
            fc = g(c)
        else:
            a, c, fc = c, d, fd
            d = a + gr * (b - a)
            fd = g(d)
    x = math.exp(0.5 * (a + b))
    # polish: Newton on f' with finite differences
    for _ in range(5):
        h = 1e-4 * x
        d1 = (float(f(x + h)) - float(f(x - h))) / (2 * h)
        d2 = (float(f(x + h)) - 2 * float(f(x)) + float(f(x - h))) / h**2
        if d2 <= 0:
            break
        step = d1 / d2
        if abs(step) > 0.1 * x or float(f(x - step)) > float(f(x)):
            break
        x -= step
    return float(f(x)), x


@dataclass
class C2Bound:
    bound: float
    argmin: float


def c2_mhr_bound() -> C2Bound:
    v, x = _golden_min(c2_mhr_ratio, 1e-6, 1e3)
    return C2Bound(v, x)


def c2_uniform_bound() -> C2Bound:
    v, x = _golden_min(c2_linear_ratio, 1e-6, 1e3)
    return C2Bound(v, x)


# --- structural constraints on solved policies --------------------------------


@dataclass
class Violation:
    kind: str  # "order" or "mhr"
    j: int
    slack: float
    infinite: bool = False


def lemma_constraint_check(omega, C: int | None = None, tol: float = 1e-6) -> list:
    """Check the ordering and MHR constraints on scaled rates omega_0..omega_{C-1}.

    Returns the violated constraints with their (negative) slack; a zero
    omega_j in a denominator is reported with ``infinite=True``.
    """
    w = np.asarray(omega, dtype=float)
    C = len(w) if C is None else C
    out = []
    for j in range(C - 1):
        if w[j + 1] > w[j] + tol:
            out.append(Violation("order", j, float(w[j] - w[j + 1])))
    for j in range(C - 1):
        rhs = 1 + (C - j - 1) * w[0] / (C * (j + 1))
        if w[j] == 0:
            out.append(Violation("mhr", j, -math.inf, infinite=True))
            continue
        slack = w[j + 1] / (j + 1) + w[C - 1] / w[j] - rhs
        if slack < -tol:
            out.append(Violation("mhr", j, float(slack)))
    return out
