"""Interval condition behind the abundance of elliptic islands.

For an amplitude parameter ``a`` the integer ``n`` is a hit when
``x = (n^(1/gamma) + a)^gamma`` falls in the window
``G(a, m) = (m + C1/a m^-xi, m + C2/a m^-xi)`` of ``m = floor(x)``.  The set
``A^n_k`` collects the ``a`` for which ``n`` hits with ``m = n + k``; it is
an interval whose endpoints solve ``(n^(1/gamma) + a)^gamma = m + C/a m^-xi``.

All differences of nearby ``gamma``-th roots are evaluated as
``x^(1/gamma) expm1(log1p(h/x)/gamma)`` to keep relative precision.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import mpmath
import numpy as np

from .core import DomainError


@dataclass(frozen=True)
class ArithmeticParams:
    a: float = 0.7
    gamma: float = 1.5
    xi: float | None = None
    C1: float = 0.2
    C2: float = 0.4
    alpha_lo: float = 0.5
    beta_hi: float = 0.9

    def __post_init__(self):
        if self.xi is None:
            object.__setattr__(self, "xi", 1.0 - 1.0 / self.gamma)
        if not self.gamma > 1:
            raise DomainError(f"gamma must exceed 1, got {self.gamma}")
        if not 0 < self.C1 < self.C2:
            raise DomainError(f"need 0 < C1 < C2, got ({self.C1}, {self.C2})")
        if not self.xi > 0:
            raise DomainError(f"xi must be positive, got {self.xi}")
        if not 0 < self.alpha_lo < self.beta_hi:
            raise DomainError(f"need 0 < alpha < beta, got [{self.alpha_lo}, {self.beta_hi}]")
        if not self.beta_hi / self.alpha_lo < self.C2 / self.C1:
            raise DomainError("beta/alpha must stay below C2/C1 so the sandwich windows are non-empty")
        if not self.a > 0:
            raise DomainError(f"a must be positive, got {self.a}")

    def with_a(self, a):
        return replace(self, a=a)

    @property
    def ell_bounds(self):
        lo = self.C2 / self.beta_hi - self.C1 / self.alpha_lo
        hi = self.C2 / self.alpha_lo - self.C1 / self.beta_hi
        return lo, hi

    @property
    def ell_mid(self):
        lo, hi = self.ell_bounds
        return 0.5 * (lo + hi)


@dataclass(frozen=True)
class Hit:
    n: int
    k: int
    value: float
    window: tuple


class MeasureClass(enum.Enum):
    AllParameters = "AllParameters"
    FullMeasure = "FullMeasure"
    ZeroMeasure = "ZeroMeasure"
    CriticalMixed = "CriticalMixed"


@dataclass(frozen=True)
class RegimeReport:
    overlapping: bool
    diverging: bool
    critical: bool
    predicted_class: MeasureClass


def root_gap(x, h, gamma):
    """``(x + h)^(1/gamma) - x^(1/gamma)`` without cancellation."""
    x = np.asarray(x, dtype=float)
    return np.power(x, 1.0 / gamma) * np.expm1(np.log1p(h / x) / gamma)


def power_gap(n, a, gamma):
    """``(n^(1/gamma) + a)^gamma - n`` without cancellation."""
    n = np.asarray(n, dtype=float)
    return n * np.expm1(gamma * np.log1p(a * np.power(n, -1.0 / gamma)))


def window(a, m, params):
    w = np.power(float(m), -params.xi) / a
    return m + params.C1 * w, m + params.C2 * w


def sandwich_windows(m, params):
    """Windows valid for every ``a`` in ``[alpha, beta]``: (superset, subset)."""
    w = float(m) ** -params.xi
    al, be = params.alpha_lo, params.beta_hi
    sup = (m + params.C1 / be * w, m + params.C2 / al * w)
    sub = (m + params.C1 / al * w, m + params.C2 / be * w)
    return sup, sub


def _offset_mp(n, m, a, gamma):
    with mpmath.workdps(50):
        return float((mpmath.mpf(n) ** (1 / mpmath.mpf(gamma)) + mpmath.mpf(a)) ** mpmath.mpf(gamma) - m)


def member(a, n, params):
    """Vectorised hit test of ``n`` for parameter values ``a``."""
    a = np.asarray(a, dtype=float)
    n = np.asarray(n, dtype=np.int64)
    d = power_gap(n, a, params.gamma)
    hit = np.zeros(np.broadcast(a, n).shape, dtype=bool)
    for shift in (0, 1):
        k = np.floor(d) - shift
        m = n + k
        ok = m >= 1
        frac = d - k
        w = np.power(np.maximum(m, 1.0), -params.xi) / a
        hit |= ok & (frac > params.C1 * w) & (frac < params.C2 * w)
    return hit


def check_n(n, params):
    """The hit record of ``n`` for ``params.a``, or None."""
    if n < 1:
        raise DomainError("n must be at least 1")
    a, g = params.a, params.gamma
    d = float(power_gap(n, a, g))
    x = n + d
    base = math.floor(d)
    for k in (base, base - 1):
        m = n + k
        if m < 1:
            continue
        lo, hi = window(a, m, params)
        off = d - k
        wlo, whi = lo - m, hi - m
        if min(abs(off - wlo), abs(off - whi), abs(off), abs(off - 1.0)) < 1e-9 * max(1.0, x):
            off = _offset_mp(n, m, a, g)
        if wlo < off < whi:
            return Hit(int(n), int(k), x, (lo, hi))
    return None


def scan(params, N):
    """All hits for ``n`` in ``[1, N]`` and their count."""
    if N < 1:
        return [], 0
    n = np.arange(1, N + 1)
    cand = np.nonzero(member(params.a, n, params) | _near_edge(params, n))[0] + 1
    hits = [h for h in (check_n(int(i), params) for i in cand) if h is not None]
    return hits, len(hits)


def _near_edge(params, n):
    d = power_gap(n, params.a, params.gamma)
    k = np.floor(d)
    m = np.maximum(n + k, 1.0)
    w = np.power(m, -params.xi) / params.a
    frac = d - k
    tol = 1e-9 * (n + d)
    return (np.abs(frac - params.C1 * w) < tol) | (np.abs(frac - params.C2 * w) < tol) | (frac < tol) | (1 - frac < tol)


def regime(params, tol=1e-12):
    g, xi = params.gamma, params.xi
    critical = abs(xi - 1.0 / g) <= tol
    overlapping = xi < 1.0 / g - tol
    diverging = xi <= 1.0 + tol
    if critical:
        cls = MeasureClass.CriticalMixed
    elif overlapping:
        cls = MeasureClass.AllParameters
    elif diverging:
        cls = MeasureClass.FullMeasure
    else:
        cls = MeasureClass.ZeroMeasure
    return RegimeReport(overlapping, diverging, critical, cls)


def interval_endpoints(n, k, C, params, iterations=8):
    """Value of ``a`` solving ``(n^(1/gamma) + a)^gamma = m + C/a m^-xi`` with ``m = n + k``."""
    n = np.asarray(n, dtype=float)
    k = np.asarray(k, dtype=float)
    m = n + k
    g = params.gamma
    scale = C * np.power(m, -params.xi)
    a = root_gap(n, k, g)
    # contraction factor ~ C m^(1/gamma - 1 - xi) / a^2, far below one
    for _ in range(iterations):
        a = root_gap(n, k + scale / a, g)
    return a


def _k_range(n, params):
    g = params.gamma
    lo = power_gap(n, params.alpha_lo, g)
    hi = power_gap(n, params.beta_hi, g)
    return lo, hi


def _pairs(N, params, first=1):
    """All ``(n, k)`` whose interval ``A^n_k`` can meet ``[alpha, beta]``."""
    n = np.arange(first, N + 1, dtype=np.int64)
    lo, hi = _k_range(n, params)
    k0 = np.maximum(np.floor(lo).astype(np.int64) - 1, 1)
    k1 = np.floor(hi).astype(np.int64)
    counts = k1 - k0 + 1
    nn = np.repeat(n, counts)
    start = np.repeat(np.cumsum(counts) - counts, counts)
    kk = np.repeat(k0, counts) + (np.arange(counts.sum()) - start)
    return nn, kk


def hit_intervals(N, params, first=1):
    """Arrays ``(n, k, left, right)`` of ``A^n_k`` clipped to ``[alpha, beta]``; empty ones dropped."""
    n, k = _pairs(N, params, first)
    left = interval_endpoints(n, k, params.C1, params)
    right = interval_endpoints(n, k, params.C2, params)
    left = np.clip(left, params.alpha_lo, params.beta_hi)
    right = np.clip(right, params.alpha_lo, params.beta_hi)
    keep = right > left
    return n[keep], k[keep], left[keep], right[keep]


def _union_length_by_group(group, left, right, span):
    # intervals are sorted by left endpoint inside each group; an offset per
    # group keeps the running maximum from leaking across groups
    off = (group - group.min()) * (span + 1.0)
    L, R = left + off, right + off
    prev = np.maximum.accumulate(np.concatenate(([-np.inf], R[:-1])))
    return np.maximum(0.0, R - np.maximum(L, prev))


def measure_partial_sum(params, N, checkpoints=None):
    """Exact ``sum_{n <= N} |A^n & [alpha, beta]| / (beta - alpha)`` and its power-law prediction."""
    if abs(params.xi - 1.0) < 1e-12:
        raise DomainError("xi = 1 needs the logarithmic variant: use measure_partial_sum_log")
    span = params.beta_hi - params.alpha_lo
    total = 0.0
    per_n = np.zeros(N + 1)
    chunk = 20_000
    for first in range(1, N + 1, chunk):
        last = min(N, first + chunk - 1)
        n, k, left, right = hit_intervals(last, params, first)
        order = np.lexsort((left, n))
        n, left, right = n[order], left[order], right[order]
        contrib = _union_length_by_group(n, left, right, span)
        np.add.at(per_n, n, contrib)
    cum = np.cumsum(per_n) / span
    total = float(cum[N])
    xi = params.xi
    asym = params.ell_mid * N ** (1.0 - xi) / (1.0 - xi)
    out = {"exact_sum": total, "asymptotic": asym, "ratio": total / asym, "N": N}
    if checkpoints is not None:
        out["checkpoints"] = {int(c): float(cum[int(c)]) for c in checkpoints if 1 <= c <= N}
    return out


def measure_partial_sum_log(params, N):
    span = params.beta_hi - params.alpha_lo
    n, k, left, right = hit_intervals(N, params)
    order = np.lexsort((left, n))
    contrib = _union_length_by_group(n[order], left[order], right[order], span)
    total = float(contrib.sum() / span)
    return {"exact_sum": total, "asymptotic": params.ell_mid * math.log(N), "N": N, "flag": "log-variant"}


def monte_carlo_partial_sum(params, N, samples=1_000_000, rng=None):
    """Monte Carlo estimate of the partial sum from direct hit tests.

    Proposals are drawn uniformly from the superset intervals valid for all
    ``a`` in ``[alpha, beta]`` (weighted by length), then accepted when
    :func:`member` confirms the hit.  Returns the estimate and its standard
    error.
    """
    rng = np.random.default_rng(rng)
    span = params.beta_hi - params.alpha_lo
    n, k = _pairs(N, params)
    # with C/a replaced by C1/beta and C2/alpha the endpoint equation no
    # longer depends on a, so one root evaluation gives each end
    m = (n + k).astype(float)
    w = np.power(m, -params.xi)
    lo = np.clip(root_gap(n, k + params.C1 / params.beta_hi * w, params.gamma), params.alpha_lo, params.beta_hi)
    hi = np.clip(root_gap(n, k + params.C2 / params.alpha_lo * w, params.gamma), params.alpha_lo, params.beta_hi)
    length = np.maximum(hi - lo, 0.0)
    keep = length > 0
    n, lo, length = n[keep], lo[keep], length[keep]
    weights = np.cumsum(length)
    total = weights[-1]
    pick = np.searchsorted(weights, rng.random(samples) * total, side="right")
    pick = np.minimum(pick, len(weights) - 1)
    a = lo[pick] + rng.random(samples) * length[pick]
    acc = member(a, n[pick], params)
    frac = acc.mean()
    est = total * frac / span
    err = total * math.sqrt(frac * (1.0 - frac) / samples) / span
    return {"estimate": float(est), "stderr": float(err), "acceptance": float(frac), "samples": samples}


def pair_correlation(params, N, max_intervals=20_000_000):
    """Double sum of pairwise intersection measures against the squared single sum.

    ``sum_{n, m <= N} |A^n & A^m|`` equals the integral of ``c(a)^2`` where
    ``c(a)`` counts the ``n`` hit by ``a``; ``c`` is integrated exactly by
    sweeping the sorted interval endpoints.
    """
    span = params.beta_hi - params.alpha_lo
    reached = N
    n_all, _, left, right = hit_intervals(N, params)
    if len(left) > max_intervals:
        cut = np.searchsorted(np.cumsum(np.bincount(n_all)), max_intervals)
        reached = int(cut) - 1
        sel = n_all <= reached
        left, right = left[sel], right[sel]
    pts = np.concatenate((left, right))
    step = np.concatenate((np.ones_like(left), -np.ones_like(right)))
    order = np.argsort(pts, kind="stable")
    pts, step = pts[order], step[order]
    count = np.cumsum(step)
    seg = np.diff(pts)
    c = count[:-1]
    single = float(np.sum(c * seg) / span)
    double = float(np.sum(c * c * seg) / span)
    return {
        "double_sum": double,
        "squared_single_sum": single**2,
        "ratio": double / single**2,
        "N": reached,
        "partial": reached < N,
    }


def _ell_local(n, k, params):
    a = 0.5 * (interval_endpoints(n, k, params.C1, params) + interval_endpoints(n, k, params.C2, params))
    return (params.C2 - params.C1) / a


def interval_asymptotics(n, k, params):
    """Exact interval lengths and offsets next to their leading-order forms.

    ``delta``: length of ``A^n_k``; ``Delta``: length of the ``a`` range with
    ``floor(x) = n + k``; ``Delta_bar``: shift of ``A^n_k`` from ``n`` to
    ``n + 1`` (negative); ``Kn``: the real range of ``k`` covered by
    ``[alpha, beta]``.  The leading form of ``delta`` uses the local ``ell``
    at the centre of ``A^n_k``; the bounds ``ell-`` and ``ell+`` are reported
    alongside.
    """
    g, xi = params.gamma, params.xi
    m = n + k
    left = float(interval_endpoints(n, k, params.C1, params))
    right = float(interval_endpoints(n, k, params.C2, params))
    ell = float(_ell_local(n, k, params))
    lead = m ** (-xi - (1.0 - 1.0 / g)) / g
    lo_ell, hi_ell = params.ell_bounds
    nxt = float(interval_endpoints(n + 1, k, params.C1, params))
    klo, khi = _k_range(n, params)
    e4 = g * n ** (1.0 - 1.0 / g)
    return {
        "delta_exact": right - left,
        "delta_E1": ell * lead,
        "delta_E1_bounds": (lo_ell * lead, hi_ell * lead),
        "Delta_exact": float(root_gap(m, 1.0, g)),
        "Delta_E2": m ** (-(1.0 - 1.0 / g)) / g,
        "Delta_bar_exact": nxt - left,
        "Delta_bar_E3": -(1.0 / g) * (1.0 - 1.0 / g) * k * n ** (1.0 / g - 2.0),
        "Kn_exact": (float(klo), float(khi)),
        "Kn_E4": (params.alpha_lo * e4, params.beta_hi * e4),
        "Kn_count": int(math.floor(khi) - math.ceil(klo) + 1),
    }


def wave_ratio(n, k, p, params, N=None):
    """Length-to-drift ratio of the intervals ``A^r_{k+p}`` at ``r = n eta^(gamma/(gamma-1))``, ``eta = (k+p)/k``."""
    if k < 1 or p < 1:
        raise DomainError("k and p must be positive")
    g, xi = params.gamma, params.xi
    eta = (k + p) / k
    r = n * eta ** (g / (g - 1.0))
    kp = k + p
    ell = float(_ell_local(r, kp, params))
    formula = ell * g / (g - 1.0) * n ** (1.0 - xi) / k * eta ** ((1.0 - xi * g) / (g - 1.0))
    delta = float(interval_endpoints(r, kp, params.C2, params) - interval_endpoints(r, kp, params.C1, params))
    drift = float(interval_endpoints(r + 1.0, kp, params.C1, params) - interval_endpoints(r, kp, params.C1, params))
    out = {"formula": formula, "exact": delta / abs(drift), "r": r, "eta": eta}
    if N is not None:
        out["P"] = (N ** (1.0 - 1.0 / g) / n ** (1.0 - 1.0 / g) - 1.0) * k
    return out


def critical_a(params, n=10**6):
    """Experimental: ``a`` where the exact wave ratio crosses 1 at ``xi = 1/gamma``.

    Bisection over ``[alpha, beta]`` with ``k`` set to the centre of ``K_n``
    for each trial ``a``; returns None when the ratio does not change sign.
    """
    crit = replace(params, xi=1.0 / params.gamma)

    def excess(a):
        k = max(1, int(round(float(power_gap(n, a, crit.gamma)))))
        return wave_ratio(n, k, 1, crit)["exact"] - 1.0

    lo, hi = 0.05, 20.0
    flo, fhi = excess(lo), excess(hi)
    if flo * fhi > 0:
        return None
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        fm = excess(mid)
        if fm * flo > 0:
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def island_measure_series(gamma, K, decades=True):
    """Partial sums of the refined and crude island-measure series.

    Refined terms ``k^((2-gamma)/(gamma-1) - 3)``, crude terms
    ``n^(-3(1 - 1/gamma))``; ``Finite`` iff the refined exponent is below -1.
    Sums are reported at every power of ten up to ``K``.
    """
    if not 1 < gamma < 2:
        raise DomainError(f"series analysis assumes 1 < gamma < 2, got {gamma}")
    if K < 10:
        raise DomainError("K must be at least 10")
    e_ref = (2.0 - gamma) / (gamma - 1.0) - 3.0
    e_crude = -3.0 * (1.0 - 1.0 / gamma)
    marks = [10**j for j in range(1, int(math.log10(K)) + 1)] if decades else []
    if K not in marks:
        marks.append(K)
    ref, crude = _power_sums(e_ref, marks), _power_sums(e_crude, marks)
    tol = 1e-12
    return {
        "refined_exponent": e_ref,
        "crude_exponent": e_crude,
        "partial_sums": dict(zip(marks, ref)),
        "crude_bound_sums": dict(zip(marks, crude)),
        "verdict": "Finite" if e_ref < -1.0 - tol else "Divergent",
        "crude_verdict": "Finite" if e_crude < -1.0 - tol else "Divergent",
    }


def _power_sums(e, marks):
    out, acc, start = [], 0.0, 1
    for mk in marks:
        # chunked so memory stays bounded for K ~ 1e8; summed small-to-large per chunk
        for lo in range(start, mk + 1, 5_000_000):
            hi = min(mk, lo + 4_999_999)
            acc += math.fsum(np.power(np.arange(hi, lo - 1, -1, dtype=float), e))
        start = mk + 1
        out.append(acc)
    return out


def orbit_form_member(n, m, A, params):
    """Orbit-level window test with the half-integer offsets kept.

    True when ``((n + 1/2)^(1/gamma) + 2A)^gamma`` lies in
    ``(m - 1/2 - C2/A m^-xi, m - 1/2 - C1/A m^-xi)``; this is the form the
    simplified condition drops offsets from and mirrors.
    """
    g, xi = params.gamma, params.xi
    x = (n + 0.5) + float(power_gap(n + 0.5, 2.0 * A, g))
    w = m ** -xi / A
    return (m - 0.5 - params.C2 * w) < x < (m - 0.5 - params.C1 * w)
