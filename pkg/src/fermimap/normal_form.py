"""Linear normal frame, cubic Taylor coefficients and island areas of elliptic period-2 points.

Complex coordinates ``z = dt + i dv`` are centred on the upper orbit point
``p2``.  A real-linear map with matrix ``M`` reads ``z -> a1 z + a2 conj(z)``
with ``a1 = (M00 + M11 + i(M10 - M01))/2`` and
``a2 = (M00 - M11 + i(M10 + M01))/2``.  The symplectic frame
``z = b1 u + b2 conj(u)`` turns ``dF^2(p2)`` into multiplication by the
multiplier ``lambda_p``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    DomainError,
    SystemParams,
    VerificationError,
    flight_time_derivative,
    forward,
    phase_diff,
    wall_derivatives,
)
from .orbits import (
    Classification,
    amplitude_for_half_trace,
    find_plus_orbit,
    period_differential,
    stability,
    window_anchor,
)

THETA_BAND = (0.7 * math.pi, 0.9 * math.pi)


@dataclass(frozen=True)
class RotationFrame:
    b1: complex
    b2: complex
    D: float
    lambda_p: complex
    theta_p: float
    a1: complex
    a2: complex

    def to_u(self, dz):
        return np.conj(self.b1) * dz - self.b2 * np.conj(dz)

    def to_z(self, u):
        return self.b1 * u + self.b2 * np.conj(u)


@dataclass(frozen=True)
class BirkhoffCoeffs:
    A3: complex
    A4: complex
    A5: complex
    A6: complex
    A7: complex
    A8: complex
    A9: complex
    linear: complex = 1.0
    radius: float = 0.0
    validation_residual: float = 0.0


@dataclass(frozen=True)
class NondegeneracyReport:
    omega: float
    omega3: float | None
    omega3_bracket: float | None
    resonant_orders: frozenset
    general_elliptic: bool


def resonance_check(lam, angle_tol=1e-6):
    lam = complex(lam)
    if abs(abs(lam) - 1.0) > 1e-9:
        raise DomainError(f"multiplier {lam} is not on the unit circle")
    return frozenset(k for k in (1, 2, 3, 4) if abs(lam**k - 1.0) < angle_tol)


def complex_coefficients(M):
    M = np.asarray(M, dtype=float)
    a1 = 0.5 * complex(M[0, 0] + M[1, 1], M[1, 0] - M[0, 1])
    a2 = 0.5 * complex(M[0, 0] - M[1, 1], M[1, 0] + M[0, 1])
    return a1, a2


def a1_closed_form(orbit, params):
    """``a1`` of ``dF^2(p2)`` written through the plate acceleration and both ``T'``."""
    acc = wall_derivatives(orbit.p2.t, 2, params)
    T1 = flight_time_derivative(orbit.p1.v, params)
    T2 = flight_time_derivative(orbit.p2.v, params)
    re = 1.0 + 2.0 * acc * (T1 + T2) + 2.0 * acc**2 * T1 * T2
    im = 2.0 * acc + 2.0 * acc**2 * T1 - 0.5 * (T1 + T2) - acc * T1 * T2
    return complex(re, im)


def frame_from_matrix(M, tol=1e-6):
    """Symplectic frame conjugating an elliptic area-preserving ``M`` to a rotation."""
    a1, a2 = complex_coefficients(M)
    c = a1.real
    if not abs(c) < 1.0:
        raise DomainError(f"half-trace {c} is not elliptic")
    s = math.copysign(math.sqrt(1.0 - c * c), a1.imag)
    D2 = 2.0 * s * (s + a1.imag)
    if not D2 > 0:
        raise VerificationError(f"D^2 = {D2} <= 0")
    D = math.sqrt(D2)
    b1 = complex((a1.imag + s) / D, 0.0)
    b2 = 1j * a2 / D
    lam = complex(c, s)
    frame = RotationFrame(b1, b2, D, lam, math.atan2(s, c), a1, a2)
    symp = abs(b1) ** 2 - abs(b2) ** 2 - 1.0
    # image of u=1 and u=i under the linearised map in u coordinates
    lin = lambda u: frame.to_u(a1 * frame.to_z(u) + a2 * np.conj(frame.to_z(u)))
    rot = max(abs(lin(1.0) - lam), abs(lin(1j) - 1j * lam))
    if abs(symp) > 1e-9 * max(1.0, abs(b1) ** 2) or rot > tol:
        raise VerificationError(f"frame check failed: symplectic defect {symp:.2e}, rotation residual {rot:.2e}")
    return frame


def rotation_frame(orbit, params, tol=1e-6):
    rep = stability(orbit, params)
    if rep.classification is not Classification.Elliptic:
        raise DomainError(f"orbit is {rep.classification.value}, not elliptic")
    if resonance_check(rep.multiplier) & {1, 2}:
        raise DomainError("multiplier is resonant at order <= 2")
    return frame_from_matrix(period_differential(orbit, params, at=2), tol)


def mean_slope(orbit, params):
    """``T'`` averaged over the two orbit points."""
    return 0.5 * float(flight_time_derivative(orbit.p1.v, params) + flight_time_derivative(orbit.p2.v, params))


def _second_iterate_u(orbit, params, frame, u):
    """``F^2`` in frame coordinates around ``p2``, differences taken on the lift."""
    p = orbit.p2
    dz = frame.to_z(np.asarray(u, dtype=complex))
    t1, v1 = forward(p.t + dz.real, p.v + dz.imag, params, reduce=False)
    t2, v2 = forward(t1, v1, params, reduce=False)
    b1, w1 = forward(p.t, p.v, params, reduce=False)
    b2, w2 = forward(b1, w1, params, reduce=False)
    return frame.to_u((t2 - b2) + 1j * (v2 - w2))


def _circle_modes(orbit, params, frame, r, samples):
    phi = 2.0 * math.pi * np.arange(samples) / samples
    g = _second_iterate_u(orbit, params, frame, r * np.exp(1j * phi))
    c = np.fft.fft(g) / samples

    def mode(k):
        return c[k % samples]

    lam = frame.lambda_p
    return {
        "A3": mode(2) / r**2,
        "A4": mode(0) / r**2,
        "A5": mode(-2) / r**2,
        "A6": mode(3) / r**3,
        "A7": (mode(1) - lam * r) / r**3,
        "A8": mode(-1) / r**3,
        "A9": mode(-3) / r**3,
        "lin": mode(1) / r,
    }


def taylor_coeffs(orbit, params, radius=None, levels=3, samples=32, frame=None):
    """Coefficients of ``F^2`` up to cubic order in ``(u, conj u)`` at ``p2``.

    Fourier modes of ``F^2`` on circles ``|u| = r, r/2, r/4`` isolate each
    monomial up to ``O(r^2)``; Richardson extrapolation in ``r^2`` removes
    the leading corrections.  ``radius`` defaults to ``0.002 T'^(-3/2)``, well
    inside the disk where the cubic terms stay small against the linear one.
    """
    if frame is None:
        frame = rotation_frame(orbit, params)
    if radius is None:
        radius = 0.002 * mean_slope(orbit, params) ** -1.5
    table = [_circle_modes(orbit, params, frame, radius / 2**j, samples) for j in range(levels)]
    est = {}
    for key in table[0]:
        col = [t[key] for t in table]
        for order in range(1, levels):
            f = 4.0**order
            col = [(f * col[i + 1] - col[i]) / (f - 1.0) for i in range(len(col) - 1)]
        est[key] = complex(col[0])
    coeffs = BirkhoffCoeffs(est["A3"], est["A4"], est["A5"], est["A6"], est["A7"], est["A8"], est["A9"],
                            linear=est["lin"], radius=radius)
    rv = radius / 4.0
    u = rv * np.exp(2j * math.pi * (np.arange(samples) + 0.5) / samples)
    g = _second_iterate_u(orbit, params, frame, u)
    resid = np.max(np.abs(g - cubic_model(coeffs, frame.lambda_p, u))) / np.max(np.abs(g))
    return BirkhoffCoeffs(*(getattr(coeffs, k) for k in ("A3", "A4", "A5", "A6", "A7", "A8", "A9")),
                          linear=coeffs.linear, radius=radius, validation_residual=float(resid))


def cubic_model(c, lam, u):
    ub = np.conj(u)
    return (lam * u + c.A3 * u**2 + c.A4 * u * ub + c.A5 * ub**2
            + c.A6 * u**3 + c.A7 * u**2 * ub + c.A8 * u * ub**2 + c.A9 * ub**3)


def omega(coeffs, lam):
    lam = complex(lam)
    if abs(lam - 1.0) < 1e-12 or abs(lam**3 - 1.0) < 1e-12:
        raise DomainError(f"multiplier {lam} is resonant at order 1 or 3")
    q1 = (lam + 1.0) / (lam - 1.0)
    q3 = (lam**3 + 1.0) / (lam**3 - 1.0)
    return -1j * (1j * (np.conj(lam) * coeffs.A7).imag + 3.0 * abs(coeffs.A3) ** 2 * q1 + abs(coeffs.A5) ** 2 * q3)


def omega_cot(coeffs, theta):
    """Real form of :func:`omega` with ``lambda = exp(i theta)``."""
    lam = complex(math.cos(theta), math.sin(theta))
    return ((np.conj(lam) * coeffs.A7).imag - 3.0 * abs(coeffs.A3) ** 2 / math.tan(theta / 2)
            - abs(coeffs.A5) ** 2 / math.tan(1.5 * theta))


def in_theta_band(theta):
    return math.tan(theta / 2) > 0 and math.tan(1.5 * theta) > 0


def omega3_bracket(nu, theta):
    """Bracketed factor of the leading-order ``omega`` coefficient.

    The multiplier quotients are resolved with
    ``(l + 1)/(l - 1) = -i cot(theta/2)`` for ``l = exp(i theta)``.
    Requires ``cot(theta/2) > 0`` and ``cot(3 theta/2) > 0``.
    """
    if not in_theta_band(theta):
        raise DomainError(f"theta={theta} leaves the band where cot(theta/2) and cot(3 theta/2) are positive")
    k1 = 1.0 / math.tan(theta / 2)
    k3 = 1.0 / math.tan(1.5 * theta)
    return 2.0 * (nu * nu + 4.0 * nu + 6.0) - nu * (2.0 + nu) ** 2 * (3.0 * k1 + k3 * (3.0 + nu) ** 2)


@dataclass(frozen=True)
class IslandArea:
    area: float
    radius: float
    fraction: float
    t_extent: float
    v_extent: float
    iterations: int
    grid: int


def _bounded_mask(orbit, params, frame, u0, radius, iterations):
    p = orbit.p2
    inside = np.ones(u0.shape, dtype=bool)
    for step in (1, -1):
        dz = frame.to_z(u0)
        t, v = p.t + dz.real, p.v + dz.imag
        alive = np.ones(u0.shape, dtype=bool)
        for _ in range(iterations):
            for _ in range(2):
                if step == 1:
                    t, v = forward(t, v, params)
                else:
                    t, v = _backward_safe(t, v, params)
            u = frame.to_u(phase_diff(t, p.t) + 1j * (v - p.v))
            alive &= np.abs(u) < radius
            # park escaped points on the orbit so they stay finite
            t = np.where(alive, t, p.t)
            v = np.where(alive, v, p.v)
        inside &= alive
    return inside


def _backward_safe(t, v, params):
    v0 = v - 2.0 * params.A * np.cos(2.0 * math.pi * t)
    v0 = np.maximum(v0, params.v_min)
    t0 = t - params.C * np.power(v0, params.gamma)
    return t0 - np.floor(t0), v0


def island_area(orbit, params, radius=None, iterations=1000, grid=81, frame=None, max_retries=6):
    """Area of the set that stays within ``|u| < radius`` of ``p2`` under ``F^{+-2k}``, ``k <= iterations``.

    The grid is laid out in frame coordinates ``u`` (unit Jacobian, so areas
    agree with the ``(t, v)`` plane).  ``radius`` defaults to
    ``0.03 T'^(-3/2)``; it is doubled while the bounded set fills the disk and
    halved when nothing stays bounded.
    """
    if frame is None:
        if stability(orbit, params).classification is Classification.Elliptic:
            frame = rotation_frame(orbit, params)
        else:
            frame = RotationFrame(1.0 + 0j, 0j, 1.0, 1.0 + 0j, 0.0, 1.0 + 0j, 0j)
    if radius is None:
        radius = 0.03 * mean_slope(orbit, params) ** -1.5
    axis = (np.arange(grid) + 0.5) / grid * 2.0 - 1.0
    for _ in range(max_retries):
        u0 = radius * (axis[None, :] + 1j * axis[:, None])
        mask = _bounded_mask(orbit, params, frame, u0, radius, iterations)
        frac = float(mask.mean())
        ring = mask & (np.abs(u0) > 0.9 * radius)
        if frac == 0.0:
            radius *= 0.5
            continue
        if ring.any():
            radius *= 2.0
            continue
        z = frame.to_z(u0[mask])
        return IslandArea(frac * (2.0 * radius) ** 2, radius, frac, float(np.ptp(z.real)),
                          float(np.ptp(z.imag)), iterations, grid)
    return IslandArea(0.0, radius, 0.0, 0.0, 0.0, iterations, grid)


def area_scaling(slopes, areas):
    """Least-squares slope of ``log(area)`` against ``log(T')``."""
    x = np.log(np.asarray(slopes, dtype=float))
    y = np.log(np.asarray(areas, dtype=float))
    if len(x) < 4 or x.max() - x.min() < math.log(10.0) - 1e-12:
        raise DomainError("need at least 4 islands spanning a decade in T'")
    return float(np.polyfit(x, y, 1)[0])


def omega3_value(nu, theta, third, D, slope):
    """Leading ``T'^3`` coefficient of ``omega`` for equal slopes ``T'``."""
    return (2.0 + nu) * third**2 / (64.0 * D**6 / slope**3) * omega3_bracket(nu, theta)


def nondegeneracy(orbit, params, threshold=1e-6, angle_tol=1e-6):
    """Resonances, ``omega`` from numeric coefficients and the leading-order bracket.

    The bracket is evaluated at ``nu = phi'' T'`` with the averaged slope and
    at ``|theta_p|``; it is ``None`` when that angle leaves the positive
    cotangent band.
    """
    frame = rotation_frame(orbit, params)
    res = resonance_check(frame.lambda_p, angle_tol)
    slope = mean_slope(orbit, params)
    coeffs = taylor_coeffs(orbit, params, frame=frame)
    w = float(omega(coeffs, frame.lambda_p).real)
    nu = float(wall_derivatives(orbit.p2.t, 2, params)) * slope
    theta = abs(frame.theta_p)
    bracket = w3 = None
    if in_theta_band(theta) and -1.0 < nu < 0.0:
        bracket = omega3_bracket(nu, theta)
        w3 = omega3_value(nu, theta, wall_derivatives(orbit.p2.t, 3, params), frame.D, slope)
    general = not res and abs(w) > threshold * slope**3
    return NondegeneracyReport(w, w3, bracket, res, general)


def elliptic_catalog(m_values, gamma=1.5, C=1.0, target=-0.7, A_target=1.0):
    """Elliptic Plus orbits with half-trace ``target``, one per ``m``.

    For each ``m`` the partner ``n`` is chosen so that the window anchor
    amplitude is closest to ``A_target``; the symmetry centre sits at
    ``t0 = -1/4``.  Returns ``(orbit, params)`` pairs.
    """
    base = SystemParams(A=A_target, C=C, gamma=gamma, t0=-0.25)
    out = []
    for m in m_values:
        n = min(range(int(m)), key=lambda k: abs(window_anchor(k, int(m), base) - A_target))
        A = amplitude_for_half_trace(n, int(m), base, target)
        p = base.with_A(A)
        out.append((find_plus_orbit(n, int(m), p), p))
    return out
