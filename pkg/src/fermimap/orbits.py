"""Period-2 orbits of the static-wall map and their linear stability.

Two families exist for the sinusoidal plate:

* ``Plus`` orbits are symmetric under the reversor.  Both points lie on the
  fixed-point locus ``l_n(t) = (t, v(2(t0 - t) + n))`` and the upper point is
  an intersection of ``l_m`` with the image ``F(l_n)``.
* ``Minus`` orbits have half-integer flight times, ``T(v_i) = k_i + 1/2``,
  and opposite plate accelerations at the two impacts.

Stability is expressed through ``nu_i = phi''_i T'(v_i)`` with the crossed
index convention ``phi''_1 = phi''(t_2)`` and ``phi''_2 = phi''(t_1)``: the
acceleration that multiplies ``T'(v_1)`` in the Jacobian is the one at the
landing phase of the first flight.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .core import (
    TWO_PI,
    DomainError,
    PhasePoint,
    ResolutionError,
    VerificationError,
    differential,
    flight_time,
    flight_time_derivative,
    flight_time_inverse,
    forward,
    phase_diff,
    reversor,
    wall_derivatives,
    wrap,
)

PARABOLIC_TOL = 1e-9


class Kind(enum.Enum):
    Plus = "Plus"
    Minus = "Minus"


class Classification(enum.Enum):
    Elliptic = "Elliptic"
    Hyperbolic = "Hyperbolic"
    Parabolic = "Parabolic"


@dataclass(frozen=True)
class PeriodicOrbit2:
    """A period-2 orbit ``p1 -> p2 -> p1`` with ``p1.v < p2.v``.

    ``tau`` is the phase of the locus intersection that produced a Plus orbit
    (``None`` for Minus orbits).  ``tag`` marks Plus orbits found away from
    the intersection closest to phase zero as ``"outside-proposition"``.
    """

    p1: PhasePoint
    p2: PhasePoint
    kind: Kind
    n: int
    m: int
    residual: float
    tau: float | None = None
    tag: str = ""


@dataclass(frozen=True)
class StabilityReport:
    kind: Kind
    nu1: float
    nu2: float
    half_trace: float
    numeric_half_trace: float
    classification: Classification
    multiplier: complex | None


@dataclass
class CatalogEntry:
    orbit: PeriodicOrbit2
    report: StabilityReport
    selected: bool


@dataclass
class Catalog:
    entries: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)


def _v(T, params):
    return float(flight_time_inverse(T, params))


def locus_point(n, t, params):
    arg = 2.0 * (params.t0 - t) + n
    if not arg > 0:
        raise DomainError(f"branch {n} is undefined at t={t}: flight time {arg} <= 0")
    return PhasePoint(float(wrap(t)), _v(arg, params))


def image_locus_point(n, tau, params):
    arg = 2.0 * (tau - params.t0) + n
    if not arg > 0:
        raise DomainError(f"image branch {n} is undefined at tau={tau}: flight time {arg} <= 0")
    v = _v(arg, params) + 2.0 * wall_derivatives(tau, 1, params)
    return PhasePoint(float(wrap(tau)), float(v))


def _h(tau, n, m, params):
    """Velocity gap between the image branch ``F(l_n)`` and ``l_m``."""
    vn = flight_time_inverse(2.0 * (tau - params.t0) + n, params)
    vm = flight_time_inverse(2.0 * (params.t0 - tau) + m, params)
    return vn + 2.0 * params.A * np.cos(TWO_PI * tau) - vm


def orbit_residual(p1, p2, params):
    """Max-norm of ``F(p1) - p2`` and ``F^2(p1) - p1``, phases compared on the circle."""
    t2, v2 = forward(p1.t, p1.v, params, reduce=False)
    t3, v3 = forward(t2, v2, params, reduce=False)
    return float(max(abs(phase_diff(t2, p2.t)), abs(v2 - p2.v), abs(phase_diff(t3, p1.t)), abs(v3 - p1.v)))


def _tau_window(n, m, params):
    # tau and tau + 1/2 describe the same orbit with labels (n, m) and
    # (n + 1, m - 1), so a half period of tau labels every orbit once.
    lo = max(-0.25, params.t0 - n / 2.0)
    hi = min(0.25, params.t0 + m / 2.0)
    eps = 1e-12
    return lo + eps, hi - eps


def _plus_from_tau(tau, n, m, params, tol, tag):
    pa = PhasePoint(float(wrap(tau)), _v(2.0 * (params.t0 - tau) + m, params))
    pb = PhasePoint(float(wrap(2.0 * params.t0 - tau)), _v(2.0 * (tau - params.t0) + n, params))
    if abs(pa.v - pb.v) <= 1e-12 * max(pa.v, 1.0):
        return None
    p1, p2 = (pb, pa) if pb.v < pa.v else (pa, pb)
    res = orbit_residual(p1, p2, params)
    if not res < tol:
        raise VerificationError(f"Plus orbit ({n},{m}) at tau={tau}: residual {res:.3e} >= tol {tol:.1e}")
    return PeriodicOrbit2(p1, p2, Kind.Plus, n, m, res, float(tau), tag)


def find_plus_orbits(n, m, params, tol=1e-9, samples=10_000):
    """All Plus orbits built on ``F(l_n) & l_m`` in one half period of tau.

    Roots are bracketed on ``samples`` grid points and refined with Brent's
    method.  The root with the smallest non-negative tau is untagged; the
    others carry ``tag="outside-proposition"``.
    """
    if not m > n >= 0:
        raise DomainError(f"need m > n >= 0, got n={n}, m={m}")
    lo, hi = _tau_window(n, m, params)
    if not hi > lo:
        return []
    grid = np.linspace(lo, hi, samples)
    hv = _h(grid, n, m, params)
    roots = [float(t) for t in grid[hv == 0.0]]
    for i in np.nonzero(hv[:-1] * hv[1:] < 0)[0]:
        roots.append(brentq(_h, grid[i], grid[i + 1], args=(n, m, params), xtol=1e-15, rtol=1e-15))
    roots.sort()
    nonneg = [r for r in roots if r >= 0]
    primary = nonneg[0] if nonneg else None
    orbits = []
    for r in roots:
        orb = _plus_from_tau(r, n, m, params, tol, "" if r == primary else "outside-proposition")
        if orb is not None:
            orbits.append(orb)
    return orbits


def find_plus_orbit(n, m, params, tol=1e-9, samples=10_000):
    """The Plus orbit whose upper point sits closest to phase 0 from above, or None."""
    for orb in find_plus_orbits(n, m, params, tol, samples):
        if orb.tag == "":
            return orb
    return None


def find_minus_orbit(n, m, params, tol=1e-9, sign=1):
    """Minus orbit with ``T(v1) = n + 1/2`` and ``T(v2) = m + 1/2``, or None.

    ``sign`` picks the root ``t2 = sign * arccos(...) / 2pi`` of
    ``2A cos(2 pi t2) = v2 - v1``; both roots share the same trace.
    """
    if not m > n >= 0:
        raise DomainError(f"need m > n >= 0, got n={n}, m={m}")
    if sign not in (1, -1):
        raise DomainError("sign must be +1 or -1")
    v1 = _v(n + 0.5, params)
    v2 = _v(m + 0.5, params)
    gap = v2 - v1
    if params.A == 0 or gap > 2.0 * params.A:
        return None
    t2 = sign * math.acos(min(1.0, gap / (2.0 * params.A))) / TWO_PI
    p1 = PhasePoint(float(wrap(t2 - 0.5)), v1)
    p2 = PhasePoint(float(wrap(t2)), v2)
    res = orbit_residual(p1, p2, params)
    if not res < tol:
        raise VerificationError(f"Minus orbit ({n},{m}): residual {res:.3e} >= tol {tol:.1e}")
    return PeriodicOrbit2(p1, p2, Kind.Minus, n, m, res)


def nu_parameters(orbit, params):
    acc2 = wall_derivatives(orbit.p2.t, 2, params)
    acc1 = wall_derivatives(orbit.p1.t, 2, params)
    nu1 = acc2 * flight_time_derivative(orbit.p1.v, params)
    nu2 = acc1 * flight_time_derivative(orbit.p2.v, params)
    return float(nu1), float(nu2)


def period_differential(orbit, params, at=2):
    """Jacobian of ``F^2`` at ``p2`` (``at=2``) or ``p1`` (``at=1``)."""
    J1 = differential(orbit.p1, params)
    J2 = differential(orbit.p2, params)
    return J1 @ J2 if at == 2 else J2 @ J1


def half_trace_formula(kind, nu1, nu2):
    if kind is Kind.Plus:
        return 1.0 + 2.0 * (nu1 + nu2) + 2.0 * nu1 * nu2
    return 1.0 + 2.0 * nu1 * nu2


def classify_half_trace(h):
    if abs(h - 1.0) < PARABOLIC_TOL or abs(h + 1.0) < PARABOLIC_TOL:
        return Classification.Parabolic
    return Classification.Elliptic if abs(h) < 1.0 else Classification.Hyperbolic


def report_from_nu(kind, nu1, nu2, numeric=None):
    h = half_trace_formula(kind, nu1, nu2)
    cls = classify_half_trace(h)
    mult = complex(h, math.sqrt(1.0 - h * h)) if cls is Classification.Elliptic else None
    return StabilityReport(kind, nu1, nu2, h, h if numeric is None else numeric, cls, mult)


def stability(orbit, params, agreement=1e-6):
    nu1, nu2 = nu_parameters(orbit, params)
    numeric = 0.5 * float(np.trace(period_differential(orbit, params)))
    rep = report_from_nu(orbit.kind, nu1, nu2, numeric)
    if abs(rep.half_trace - numeric) > agreement * max(1.0, abs(numeric)):
        raise VerificationError(
            f"half-trace mismatch for {orbit.kind.value} orbit ({orbit.n},{orbit.m}): "
            f"formula {rep.half_trace!r} vs Jacobian {numeric!r}"
        )
    return rep


def elliptic_test(report, c1, c2):
    """Whether the orbit sits in the elliptic strip selected by ``(c1, c2)``."""
    if not -1.0 <= c1 < c2 <= 0.0:
        raise DomainError(f"need -1 <= c1 < c2 <= 0, got ({c1}, {c2})")
    nu1, nu2 = report.nu1, report.nu2
    s = nu1 + nu2 + nu1 * nu2 if report.kind is Kind.Plus else nu1 * nu2
    return c1 < s < c2


def window_anchor(n, m, params):
    """Amplitude at which ``F(l_n)`` and ``l_m`` meet exactly at phase 0."""
    return 0.5 * (_v(m + 2.0 * params.t0, params) - _v(n - 2.0 * params.t0, params))


def _selected(A, n, m, params, c1, c2, tol):
    p = params.with_A(A)
    try:
        orb = find_plus_orbit(n, m, p, tol, samples=2001)
    except VerificationError:
        return False
    if orb is None:
        return False
    rep = stability(orb, p)
    return rep.classification is Classification.Elliptic and elliptic_test(rep, c1, c2)


def _refine_edge(a_in, a_out, pred, xtol):
    while abs(a_out - a_in) > xtol * max(1.0, abs(a_in)):
        mid = 0.5 * (a_in + a_out)
        if pred(mid):
            a_in = mid
        else:
            a_out = mid
    return 0.5 * (a_in + a_out)


def elliptic_A_window(n, m, params, c1=-1.0, c2=0.0, grid=None, refine=True, tol=1e-9):
    """Maximal interval of amplitudes with an elliptic Plus orbit on ``(n, m)``.

    ``grid`` defaults to 801 amplitudes on ``[Abar - 0.2 w, Abar + 0.02 w]``
    where ``Abar`` is the anchor amplitude and ``w = 1/(Abar T'(v(m))^2)`` the
    expected width scale.  The longest run of selected grid points is returned,
    with both edges bisected to relative precision 1e-12 when ``refine``.
    """
    if not m > n:
        raise DomainError(f"need m > n, got n={n}, m={m}")
    if grid is None:
        Abar = window_anchor(n, m, params)
        w = 1.0 / (Abar * flight_time_derivative(_v(float(m), params), params) ** 2)
        grid = np.linspace(Abar - 0.2 * w, Abar + 0.02 * w, 801)
    grid = np.asarray(grid, dtype=float)
    ok = np.array([_selected(A, n, m, params, c1, c2, tol) for A in grid])
    if not ok.any():
        return None
    # longest run of consecutive selected amplitudes
    edges = np.diff(np.concatenate(([0], ok.astype(int), [0])))
    starts = np.nonzero(edges == 1)[0]
    stops = np.nonzero(edges == -1)[0] - 1
    j = int(np.argmax(stops - starts))
    i0, i1 = int(starts[j]), int(stops[j])
    if i1 - i0 < 2:
        raise ResolutionError(
            f"window for ({n},{m}) spans {i1 - i0} grid steps; refine the amplitude grid"
        )
    lo, hi = float(grid[i0]), float(grid[i1])
    if refine:
        pred = lambda A: _selected(A, n, m, params, c1, c2, tol)
        if i0 > 0:
            lo = _refine_edge(lo, float(grid[i0 - 1]), pred, 1e-12)
        if i1 < len(grid) - 1:
            hi = _refine_edge(hi, float(grid[i1 + 1]), pred, 1e-12)
    return lo, hi


def amplitude_for_half_trace(n, m, params, target, window=None, tol=1e-9):
    """Amplitude inside the elliptic window where the Plus orbit has the given half-trace."""
    if window is None:
        window = elliptic_A_window(n, m, params)
    if window is None:
        raise DomainError(f"no elliptic window for ({n},{m})")
    lo, hi = window

    def g(A):
        p = params.with_A(A)
        orb = find_plus_orbit(n, m, p, tol)
        return math.nan if orb is None else stability(orb, p).half_trace - target

    # the half-trace falls monotonically from +1 at the upper edge, so the
    # first crossing met while walking down from ``hi`` is the wanted one
    span = hi - lo
    walk = np.linspace(hi - 1e-9 * span, lo + 1e-9 * span, 401)
    prev_A, prev_g = walk[0], g(walk[0])
    for A in walk[1:]:
        cur = g(A)
        if prev_g * cur <= 0:
            return brentq(g, A, prev_A, xtol=1e-15, rtol=1e-15)
        prev_A, prev_g = A, cur
    raise DomainError(f"half-trace {target} not reached inside the window of ({n},{m})")


def scan_orbits(params, T_max, c1=-1.0, c2=0.0, tol=1e-9):
    """Every verified period-2 orbit with both flight times below ``T_max``.

    Entries are ordered by ``(n, m, kind)``; failures are collected in
    ``catalog.failures`` as ``(n, m, kind, message)`` without stopping the scan.
    """
    cat = Catalog()
    if T_max < 1:
        return cat
    m_top = int(math.ceil(T_max)) + 1
    for n in range(0, m_top):
        for m in range(n + 1, m_top + 1):
            found = []
            try:
                found += find_plus_orbits(n, m, params, tol)
            except (VerificationError, DomainError) as exc:
                cat.failures.append((n, m, Kind.Plus, str(exc)))
            for sign in (1, -1):
                try:
                    orb = find_minus_orbit(n, m, params, tol, sign)
                except (VerificationError, DomainError) as exc:
                    cat.failures.append((n, m, Kind.Minus, str(exc)))
                    continue
                if orb is not None and not (sign == -1 and orb.p2.t in (0.0, 0.5)):
                    found.append(orb)
            for orb in found:
                if max(flight_time(orb.p1.v, params), flight_time(orb.p2.v, params)) >= T_max:
                    continue
                try:
                    rep = stability(orb, params)
                except VerificationError as exc:
                    cat.failures.append((n, m, orb.kind, str(exc)))
                    continue
                sel = rep.classification is Classification.Elliptic and elliptic_test(rep, c1, c2)
                cat.entries.append(CatalogEntry(orb, rep, sel))
    cat.entries.sort(key=lambda e: (e.orbit.n, e.orbit.m, e.orbit.kind.value, e.orbit.p2.t))
    return cat


def is_reversor_fixed(p, params, tol=1e-9):
    q = reversor(p, params)
    return abs(phase_diff(q.t, p.t)) < tol and abs(q.v - p.v) < tol
