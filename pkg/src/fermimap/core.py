"""Static-wall map of a particle bouncing on a sinusoidally moving plate.

The plate sits at height ``B + A/(2 pi) sin(2 pi t)`` and the particle, moving
in a power-law potential, returns to the plate after a flight time
``T(v) = C v**gamma``.  One collision maps

    t' = t + T(v)            (mod 1)
    v' = v + 2 A cos(2 pi t')

Every function accepts scalars or numpy arrays for ``t`` and ``v`` unless it
returns a :class:`PhasePoint`.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

TWO_PI = 2.0 * math.pi


class DomainError(ValueError):
    """Argument outside the domain where a formula makes sense."""


class DomainExit(DomainError):
    """The orbit left the admissible region ``v >= v_min``.

    ``t`` and ``v`` hold the raw, unclamped values that triggered the exit,
    ``index`` the iterate number when raised from :func:`iterate`.
    """

    def __init__(self, message, t, v, index=None):
        super().__init__(message)
        self.t = t
        self.v = v
        self.index = index


class VerificationError(RuntimeError):
    """A computed object failed its a-posteriori check (residual, agreement)."""


class ResolutionError(RuntimeError):
    """A scan grid is too coarse to resolve the feature it looks for."""


class Regime(enum.Enum):
    WeakPotential = "WeakPotential"
    Gravity = "Gravity"
    StrongPotential = "StrongPotential"
    Elastic = "Elastic"
    StrongPotentialII = "StrongPotentialII"
    FermiUlamLimit = "FermiUlamLimit"


@dataclass(frozen=True)
class SystemParams:
    """Parameters of the static-wall map.

    ``A`` is the maximal plate velocity, ``C`` and ``gamma`` define the flight
    time, ``t0`` is the centre of odd symmetry of the plate velocity that the
    reversor is built on.  ``t0`` is a real lift of 1/4 or 3/4; branch labels
    of the symmetry lines depend on the lift (``t0=-0.25`` reproduces the
    labelling ``v(n+1/2) + 2A = v(m-1/2)`` of the elliptic windows).
    ``B`` only records the mean plate height; it never enters the dynamics.
    When omitted it is set to ``A/pi + 1`` so that the plate stays above zero.
    """

    A: float
    C: float = 1.0
    gamma: float = 1.5
    t0: float = 0.25
    B: float | None = None
    v_min: float = 1e-6

    def __post_init__(self):
        if self.B is None:
            object.__setattr__(self, "B", self.A / math.pi + 1.0)
        if not self.A >= 0:
            raise DomainError(f"A must be non-negative, got {self.A}")
        if not self.C > 0:
            raise DomainError(f"C must be positive, got {self.C}")
        if not self.v_min > 0:
            raise DomainError(f"v_min must be positive, got {self.v_min}")
        if not self.gamma > -1:
            raise DomainError(f"gamma must exceed -1, got {self.gamma}")
        if not self.B > self.A / TWO_PI:
            raise DomainError(f"B={self.B} must exceed A/(2 pi)={self.A / TWO_PI}")
        frac = self.t0 % 1.0
        if not (math.isclose(frac, 0.25, abs_tol=1e-12) or math.isclose(frac, 0.75, abs_tol=1e-12)):
            raise DomainError(f"t0 must be 1/4 or 3/4 mod 1, got {self.t0}")

    def with_A(self, A):
        return SystemParams(A=A, C=self.C, gamma=self.gamma, t0=self.t0, v_min=self.v_min)


class PhasePoint(NamedTuple):
    t: float
    v: float


def wrap(t):
    """Reduce a phase to [0, 1), also for negative input."""
    r = t - np.floor(t)
    # floor can round r up to exactly 1.0 for tiny negative t
    return np.where(r >= 1.0, 0.0, r) if isinstance(r, np.ndarray) else (0.0 if r >= 1.0 else float(r))


def phase_diff(a, b):
    """Signed difference ``a - b`` of two phases, reduced to [-1/2, 1/2)."""
    d = np.asarray(a) - np.asarray(b)
    return d - np.floor(d + 0.5)


def gamma_from_alpha(alpha):
    if not alpha > 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    return 2.0 / alpha - 1.0


def classify_regime(gamma, tol=1e-12):
    if gamma < -1 - tol:
        raise DomainError(f"gamma={gamma} < -1 has no physical regime")
    if abs(gamma + 1) <= tol:
        return Regime.FermiUlamLimit
    if abs(gamma) <= tol:
        return Regime.Elastic
    if abs(gamma - 1) <= tol:
        return Regime.Gravity
    if gamma > 1:
        return Regime.WeakPotential
    if gamma > 0:
        return Regime.StrongPotential
    return Regime.StrongPotentialII


def flight_time(v, params):
    return params.C * np.power(v, params.gamma)


def flight_time_derivative(v, params):
    return params.C * params.gamma * np.power(v, params.gamma - 1.0)


def flight_time_inverse(T, params):
    if params.gamma == 0:
        raise DomainError("flight time is constant for gamma=0 and cannot be inverted")
    if np.any(np.asarray(T) <= 0):
        raise DomainError("flight time must be positive")
    return np.power(np.asarray(T, dtype=float) / params.C, 1.0 / params.gamma)


def wall_derivatives(t, order, params):
    """``order``-th time derivative of the plate position, order in 1..4."""
    A = params.A
    t = np.asarray(t, dtype=float)
    # reduce before scaling: 2 pi t loses digits for large lifts, t - floor(t) is exact
    x = TWO_PI * (t - np.floor(t))
    if order == 1:
        r = A * np.cos(x)
    elif order == 2:
        r = -TWO_PI * A * np.sin(x)
    elif order == 3:
        r = -TWO_PI**2 * A * np.cos(x)
    elif order == 4:
        r = TWO_PI**3 * A * np.sin(x)
    else:
        raise DomainError(f"derivative order must be in 1..4, got {order}")
    return r if r.ndim else float(r)


def forward(t, v, params, reduce=True):
    """Vectorised map on raw arrays, no domain check.

    With ``reduce=False`` the phase is returned as a continuous lift, which
    is what finite differences and orbit residuals need.
    """
    t1 = t + params.C * np.power(v, params.gamma)
    frac = t1 - np.floor(t1)
    v1 = v + 2.0 * params.A * np.cos(TWO_PI * frac)
    return (wrap(t1) if reduce else t1), v1


def backward(t, v, params, reduce=True):
    v0 = v - 2.0 * params.A * np.cos(TWO_PI * (t - np.floor(t)))
    t0 = t - params.C * np.power(v0, params.gamma)
    return (wrap(t0) if reduce else t0), v0


def step(p, params):
    t1, v1 = forward(float(p[0]), float(p[1]), params)
    if not v1 >= params.v_min:
        raise DomainExit(f"velocity {v1} fell below v_min={params.v_min}", t1, v1)
    return PhasePoint(float(t1), float(v1))


def step_inverse(p, params):
    t0, v0 = backward(float(p[0]), float(p[1]), params, reduce=False)
    if not v0 >= params.v_min:
        raise DomainExit(f"recovered velocity {v0} below v_min={params.v_min}", wrap(t0), v0)
    return PhasePoint(float(wrap(t0)), float(v0))


def iterate(p, n, params):
    """Trajectory of length ``|n| + 1``; negative ``n`` runs the map backwards.

    A domain exit is re-raised with the index of the failing iterate and the
    partial trajectory attached as ``exc.trajectory``.
    """
    advance = step if n >= 0 else step_inverse
    traj = [PhasePoint(float(wrap(p[0])), float(p[1]))]
    for i in range(abs(n)):
        try:
            traj.append(advance(traj[-1], params))
        except DomainExit as exc:
            exc.index = i + 1
            exc.trajectory = traj
            raise
    return traj


def differential_arrays(t, v, params):
    """Jacobians of the map at many points, shape ``(..., 2, 2)``."""
    t = np.asarray(t, dtype=float)
    v = np.asarray(v, dtype=float)
    dT = flight_time_derivative(v, params)
    t1 = t + flight_time(v, params)
    acc = -TWO_PI * params.A * np.sin(TWO_PI * (t1 - np.floor(t1)))
    J = np.empty(t.shape + (2, 2))
    J[..., 0, 0] = 1.0
    J[..., 0, 1] = dT
    J[..., 1, 0] = 2.0 * acc
    J[..., 1, 1] = 1.0 + 2.0 * dT * acc
    return J


def differential(p, params):
    return differential_arrays(float(p[0]), float(p[1]), params)


def reversor(p, params):
    t, v = p
    return PhasePoint(float(wrap(2.0 * params.t0 - t - flight_time(v, params))), float(v))


def reversor_arrays(t, v, params):
    return wrap(2.0 * params.t0 - t - flight_time(v, params)), v
