"""Nested Cantor constructions for expanding circle maps and escaping orbits.

Two families of trees are built here.  ``build_cantor`` composes a sequence
of expanding circle maps ``f_1, f_2, ...`` and keeps, at level ``n``, the
points of ``J0`` whose first ``n`` images stay in ``J0``; only inverse
branches whose whole preimage arc lies inside ``J0`` are kept.
``escape_candidate_tree`` does the same for the phase coordinate of the
static-wall map along the curve ``v = C + 2 phi'(t)``, with ``J0`` chosen in
the region where every collision gains velocity and the map is hyperbolic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    TWO_PI,
    DomainError,
    differential_arrays,
    flight_time,
    flight_time_derivative,
    forward,
    wall_derivatives,
    wrap,
)

BISECTION_STEPS = 64


class ConstructionError(RuntimeError):
    """A tree level came out empty, so the inputs violate the expansion assumptions."""


@dataclass(frozen=True)
class ExpansionBounds:
    """Slope bounds ``m_lo[n] <= |f_n'| <= m_hi[n]`` with ``m_hi <= C_ratio m_lo``."""

    m_lo: tuple
    m_hi: tuple
    C_ratio: float

    def __post_init__(self):
        lo = np.asarray(self.m_lo, dtype=float)
        hi = np.asarray(self.m_hi, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1 or lo.size == 0:
            raise DomainError("m_lo and m_hi must be non-empty sequences of equal length")
        if not np.all(lo > 1) or not np.all(hi >= lo):
            raise DomainError("need 1 < m_lo <= m_hi at every level")
        if np.any(np.diff(lo) < 0) or np.any(np.diff(hi) < 0):
            raise DomainError("slope bounds must be nondecreasing")
        if not np.all(hi <= self.C_ratio * lo * (1 + 1e-12)):
            raise DomainError(f"m_hi exceeds C_ratio * m_lo for C_ratio={self.C_ratio}")

    @property
    def M_lo(self):
        return np.cumprod(self.m_lo)

    @property
    def M_hi(self):
        return np.cumprod(self.m_hi)


@dataclass(frozen=True)
class LinearMap:
    """``x -> d x mod 1``."""

    d: int

    @property
    def slopes(self):
        return float(self.d), float(self.d)

    def lift(self, x):
        return self.d * np.asarray(x, dtype=float)

    def inverse(self, j, y):
        return (np.asarray(y, dtype=float) + j) / self.d


@dataclass(frozen=True)
class PerturbedMap:
    """``x -> d x + kappa sin(2 pi x) / (2 pi d) mod 1``, slope in ``[d - kappa/d, d + kappa/d]``."""

    d: int
    kappa: float

    def __post_init__(self):
        if not 0 <= self.kappa < self.d * (self.d - 1):
            raise DomainError(f"kappa={self.kappa} breaks expansion for degree {self.d}")

    @property
    def slopes(self):
        return self.d - self.kappa / self.d, self.d + self.kappa / self.d

    def lift(self, x):
        x = np.asarray(x, dtype=float)
        return self.d * x + self.kappa * np.sin(TWO_PI * x) / (TWO_PI * self.d)

    def inverse(self, j, y):
        target = np.asarray(y, dtype=float) + j
        pad = self.kappa / (TWO_PI * self.d**2)
        lo = target / self.d - pad
        hi = target / self.d + pad
        for _ in range(BISECTION_STEPS):
            mid = 0.5 * (lo + hi)
            below = self.lift(mid) < target
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        return 0.5 * (lo + hi)


def model_maps(degrees, kappa=0.0):
    if kappa == 0:
        return [LinearMap(int(d)) for d in degrees]
    return [PerturbedMap(int(d), kappa) for d in degrees]


def bounds_of(maps):
    lo = tuple(m.slopes[0] for m in maps)
    hi = tuple(m.slopes[1] for m in maps)
    return ExpansionBounds(lo, hi, max(h / l for l, h in zip(lo, hi)))


def k_bounds(m_lo, m_hi, length):
    """Integers with ``k + 1 <= m length < k + 2`` for both slope bounds."""
    x_lo = m_lo * length
    if not x_lo > 2:
        raise DomainError(f"need m_lo * len > 2, got {x_lo}")
    return math.floor(x_lo) - 1, math.floor(m_hi * length) - 1


@dataclass
class CantorLevel:
    left: np.ndarray
    right: np.ndarray
    parent: np.ndarray
    branch: np.ndarray

    @property
    def lengths(self):
        return self.right - self.left

    def __len__(self):
        return self.left.size


@dataclass
class CantorTree:
    J0: tuple
    levels: list
    counts: list = field(default_factory=list)
    M_lo: np.ndarray | None = None
    M_hi: np.ndarray | None = None

    @property
    def depth(self):
        return len(self.levels) - 1

    @property
    def K(self):
        return np.array([len(level) for level in self.levels])


def _pull_back(maps, paths, y):
    """Preimage of ``y`` along the inverse branches ``paths[:, l]`` of ``f_l``, last map first."""
    x = y
    for l in range(paths.shape[1] - 1, -1, -1):
        x = maps[l].inverse(paths[:, l], x)
    return x


def build_cantor(maps, J0, depth, max_nodes=5_000_000):
    """Tree of good intervals for the composition of ``maps`` down to ``depth`` levels."""
    lo, hi = float(J0[0]), float(J0[1])
    if not 0 <= lo < hi <= 1:
        raise DomainError(f"J0 must be a sub-interval of [0, 1], got {J0}")
    if depth > len(maps):
        raise DomainError(f"depth {depth} needs {depth} maps, got {len(maps)}")
    levels = [CantorLevel(np.array([lo]), np.array([hi]), np.array([-1]), np.array([-1]))]
    paths = np.zeros((1, 0), dtype=np.int64)
    counts = []
    for n in range(depth):
        f = maps[n]
        j = np.arange(f.d)
        a_lo, a_hi = f.inverse(j, lo), f.inverse(j, hi)
        good = (a_lo >= lo) & (a_hi <= hi)
        k = int(good.sum())
        if k == 0:
            raise ConstructionError(f"level {n + 1} has no good branch inside J0={J0}")
        size = len(levels[-1]) * k
        if size > max_nodes:
            raise ConstructionError(f"level {n + 1} would hold {size} intervals, above max_nodes={max_nodes}")
        parent = np.repeat(np.arange(len(levels[-1])), k)
        branch = np.tile(j[good], len(levels[-1]))
        ys_lo = np.tile(a_lo[good], len(levels[-1]))
        ys_hi = np.tile(a_hi[good], len(levels[-1]))
        parent_paths = paths[parent]
        left = _pull_back(maps, parent_paths, ys_lo)
        right = _pull_back(maps, parent_paths, ys_hi)
        levels.append(CantorLevel(left, right, parent, branch))
        paths = np.column_stack([parent_paths, branch])
        counts.append(k)
    b = bounds_of(maps[:depth]) if depth else None
    return CantorTree(
        (lo, hi), levels, counts,
        b.M_lo if b else None, b.M_hi if b else None,
    )


def running_dimension(tree, level, index=None):
    """Exponent ``s`` with ``|J'|^s = 1/K_n``; all nodes of ``level`` when ``index`` is None."""
    lengths = tree.levels[level].lengths
    if index is not None:
        lengths = lengths[index]
    if np.any(lengths >= 1):
        raise DomainError("running dimension needs intervals shorter than 1")
    return -math.log(len(tree.levels[level])) / np.log(lengths)


def level_dimensions(tree):
    """Per-level minimum running dimension, level 1 onwards."""
    return np.array([running_dimension(tree, n).min() for n in range(1, tree.depth + 1)])


def dimension_lower_bound(n, length, C_ratio, M_hi_n=None, log_M_hi_n=None):
    """Lower bound on the level-``n`` running dimension; pass ``log_M_hi_n`` when the product overflows."""
    if log_M_hi_n is None:
        if M_hi_n is None or not M_hi_n > 1:
            raise DomainError(f"M_hi_n must exceed 1, got {M_hi_n}")
        log_M_hi_n = math.log(M_hi_n)
    elif not log_M_hi_n > 0:
        raise DomainError(f"log_M_hi_n must be positive, got {log_M_hi_n}")
    num = math.log(length) + n * (math.log(length / 3) - math.log(C_ratio))
    return 1 + num / (log_M_hi_n - math.log(length))


def lower_bounds(tree):
    b = bounds_of_tree(tree)
    length = tree.J0[1] - tree.J0[0]
    return np.array([
        dimension_lower_bound(n, length, b.C_ratio, b.M_hi[n - 1]) for n in range(1, tree.depth + 1)
    ])


def bounds_of_tree(tree):
    ratio = float(np.max(tree.M_hi / tree.M_lo)) if tree.M_lo is not None else 1.0
    m_hi = tree.M_hi / np.concatenate([[1.0], tree.M_hi[:-1]])
    m_lo = tree.M_lo / np.concatenate([[1.0], tree.M_lo[:-1]])
    return ExpansionBounds(tuple(m_lo), tuple(m_hi), max(ratio, float(np.max(m_hi / m_lo))))


# --- hyperbolic region of the static-wall map ---------------------------------


@dataclass(frozen=True)
class HyperbolicRegionParams:
    """Thresholds of the region where ``|phi''| > a`` and every collision gains more than ``eps``."""

    a: float
    eps: float
    c: float
    C_height: float
    v_bar: float

    def __post_init__(self):
        if not 0 < self.c < self.a:
            raise DomainError(f"need 0 < c < a, got c={self.c}, a={self.a}")
        if not self.eps > 0:
            raise DomainError(f"eps must be positive, got {self.eps}")


def default_region(params, C_height, v_bar=None):
    a = math.pi * params.A
    if v_bar is None:
        v_bar = C_height - 2.0 * params.A
    return HyperbolicRegionParams(a=a, eps=params.A, c=a / 2, C_height=C_height, v_bar=v_bar)


def region_interval(params, region):
    """Largest phase interval inside ``{2 phi' > eps} & {|phi''| > a}``, in closed form."""
    A = params.A
    if not (region.eps < 2 * A and region.a < TWO_PI * A):
        raise DomainError("thresholds exceed the plate's velocity or acceleration amplitude")
    s_a = math.asin(region.a / (TWO_PI * A)) / TWO_PI
    w_e = math.acos(region.eps / (2 * A)) / TWO_PI
    if not s_a < w_e:
        raise DomainError(f"gain and acceleration sets do not overlap (s_a={s_a}, w_e={w_e})")
    return s_a, w_e


def in_region(t, v, params, region):
    t = wrap(np.asarray(t, dtype=float))
    acc = np.abs(wall_derivatives(t, 2, params))
    gain = 2.0 * wall_derivatives(t, 1, params)
    return (acc > region.a) & (gain > region.eps) & (np.asarray(v) >= region.v_bar)


def hyperbolicity_margin(p, params, a):
    """``|tr dF(p)| - 2``, or None when the image phase is outside ``|phi''| > a``."""
    t, v = float(p[0]), float(p[1])
    acc = wall_derivatives(t + flight_time(v, params), 2, params)
    if not abs(acc) > a:
        return None
    return abs(2.0 * (1.0 + flight_time_derivative(v, params) * acc)) - 2.0


def cone_invariance_arrays(t, v, params, c, a):
    """Cone ``|dv/dt - 2 phi''(t)| < c`` at ``(t, v)`` maps strictly into the cone at the image."""
    t = np.asarray(t, dtype=float)
    v = np.asarray(v, dtype=float)
    t1, _ = forward(t, v, params)
    acc0 = wall_derivatives(t, 2, params)
    acc1 = wall_derivatives(t1, 2, params)
    if np.any(np.abs(acc0) <= a) or np.any(np.abs(acc1) <= a):
        raise DomainError("cone test needs p and F(p) in |phi''| > a")
    dT = flight_time_derivative(v, params)
    # a slope of -1/T' inside the cone is sent to a vertical tangent
    vertical = np.abs(-1.0 / dT - 2.0 * acc0) < c
    ok = ~vertical
    for sign in (-1.0, 1.0):
        s = 2.0 * acc0 + sign * c
        dt1 = 1.0 + dT * s
        with np.errstate(divide="ignore", invalid="ignore"):
            s1 = 2.0 * acc1 + s / dt1
        ok &= (dt1 != 0) & (np.abs(s1 - 2.0 * acc1) < c)
    return ok


def cone_invariance_test(p, params, c, a):
    return bool(cone_invariance_arrays(float(p[0]), float(p[1]), params, c, a))


def calibrate_v_bar(params, c, a, samples=1000, v_start=1.0, factor=1.25, v_max=1e8, rng=None):
    """Smallest ``v`` on a geometric ladder above which ``samples`` random cones all pass."""
    rng = np.random.default_rng(rng)
    v = v_start
    while v < v_max:
        t = rng.uniform(0, 1, 20 * samples)
        vs = v * rng.uniform(1, 4, t.size)
        t1, _ = forward(t, vs, params)
        keep = (np.abs(wall_derivatives(t, 2, params)) > a) & (np.abs(wall_derivatives(t1, 2, params)) > a)
        t, vs = t[keep][:samples], vs[keep][:samples]
        if t.size and np.all(cone_invariance_arrays(t, vs, params, c, a)):
            return v
        v *= factor
    raise ConstructionError(f"no v below {v_max} passes the cone test")


def curve_velocity(t, params, C_height):
    return C_height + 2.0 * wall_derivatives(t, 1, params)


def expansion_constants(params, region):
    """Per-collision constants of the lower and upper expansion bounds."""
    A, C, g = params.A, params.C, params.gamma
    v_lo = region.C_height - 2 * A
    if not (g > 1 and v_lo > 0):
        raise DomainError("expansion bounds need gamma > 1 and a curve above v = 0")
    floor_term = v_lo ** (1 - g)
    lower = C * g * (2 * region.a - region.c) - floor_term
    upper = C * g * (2 * TWO_PI * A + region.c) + floor_term
    if not lower > 0:
        raise DomainError(f"lower expansion constant {lower} is not positive; raise C_height")
    return lower, upper


@dataclass(frozen=True)
class FnDerivative:
    value: np.ndarray
    lower_bound: float
    upper_bound: float
    in_region: np.ndarray


def Fn_derivative(t, n, C_height, params, region):
    """Phase derivative of ``F^n`` along the curve ``t -> (t, C_height + 2 phi'(t))``."""
    if n < 1:
        raise DomainError(f"n must be at least 1, got {n}")
    t = np.asarray(t, dtype=float)
    v = curve_velocity(t, params, C_height)
    tangent = np.stack([np.ones_like(t), 2.0 * wall_derivatives(t, 2, params)], axis=-1)
    inside = in_region(t, v, params, region)
    value = np.ones_like(t)
    for _ in range(n):
        J = differential_arrays(t, v, params)
        tangent = np.einsum("...ij,...j->...i", J, tangent)
        scale = np.abs(tangent[..., 0])
        value = value * scale
        tangent = tangent / scale[..., None]
        t, v = forward(t, v, params)
        inside &= in_region(t, v, params, region)
    lower_c, upper_c = expansion_constants(params, region)
    A, g = params.A, params.gamma
    k = np.arange(1, n + 1)
    lower = float(np.prod(lower_c * (C_height - 2 * A + region.eps * k) ** (g - 1)))
    upper = float(np.prod(upper_c * (C_height + 2 * A + 3 * A * k) ** (g - 1)))
    return FnDerivative(value, lower, upper, inside)


def _phase_map(t, k, params, C_height):
    """``k``-th image phase along the curve; the last step is left unreduced.

    Earlier phases are wrapped, which keeps the result continuous on any
    interval whose first ``k - 1`` images stay inside a window not containing 0.
    """
    v = curve_velocity(t, params, C_height)
    for _ in range(k - 1):
        t, v = forward(t, v, params)
    return t + flight_time(v, params)


def _solve_phase(lo, hi, k, target, params, C_height):
    """Bisection for ``_phase_map = target`` on ``[lo, hi]`` where the map is monotone."""
    increasing = _phase_map(hi, k, params, C_height) > _phase_map(lo, k, params, C_height)
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        below = (_phase_map(mid, k, params, C_height) < target) == increasing
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def _children(left, right, k, J0, params, C_height):
    """Sub-intervals on which the ``k``-th phase covers a full integer translate of ``J0``."""
    g_l = _phase_map(left, k, params, C_height)
    g_r = _phase_map(right, k, params, C_height)
    g_min, g_max = np.minimum(g_l, g_r), np.maximum(g_l, g_r)
    j_first = np.ceil(g_min - J0[0]).astype(np.int64)
    j_last = np.floor(g_max - J0[1]).astype(np.int64)
    count = np.maximum(j_last - j_first + 1, 0)
    parent = np.repeat(np.arange(left.size), count)
    offset = np.arange(count.sum()) - np.repeat(np.cumsum(count) - count, count)
    j = j_first[parent] + offset
    a = _solve_phase(left[parent], right[parent], k, j + J0[0], params, C_height)
    b = _solve_phase(left[parent], right[parent], k, j + J0[1], params, C_height)
    return np.minimum(a, b), np.maximum(a, b), parent, j, count


def check_escape_window(params, region, J0):
    s_a, w_e = region_interval(params, region)
    lo, hi = float(J0[0]), float(J0[1])
    if not (s_a <= lo < hi <= w_e):
        raise DomainError(f"J0={J0} is not inside the hyperbolic gain window ({s_a}, {w_e})")
    if not region.C_height - 2 * params.A >= region.v_bar:
        raise DomainError(f"curve dips below v_bar={region.v_bar}")
    return lo, hi


def escape_candidate_tree(params, region, J0, depth, max_nodes=2_000_000):
    """Phases on the curve whose first ``depth`` images land in ``J0``, level by level."""
    lo, hi = check_escape_window(params, region, J0)
    C_height = region.C_height
    levels = [CantorLevel(np.array([lo]), np.array([hi]), np.array([-1]), np.array([-1]))]
    counts = []
    for k in range(1, depth + 1):
        prev = levels[-1]
        left, right, parent, j, per_node = _children(prev.left, prev.right, k, (lo, hi), params, C_height)
        if left.size == 0:
            raise ConstructionError(f"escape tree is empty at level {k}")
        if left.size > max_nodes:
            raise ConstructionError(f"level {k} holds {left.size} intervals, above max_nodes={max_nodes}")
        levels.append(CantorLevel(left, right, parent, j))
        counts.append(per_node)
    return CantorTree((lo, hi), levels, counts)


def sample_escape_candidates(params, region, J0, depth, count, rng=None):
    """Random descent through the escape tree; one phase per sample, ``count`` samples."""
    lo, hi = check_escape_window(params, region, J0)
    rng = np.random.default_rng(rng)
    left = np.full(count, lo)
    right = np.full(count, hi)
    for k in range(1, depth + 1):
        g_l = _phase_map(left, k, params, region.C_height)
        g_r = _phase_map(right, k, params, region.C_height)
        j_first = np.ceil(np.minimum(g_l, g_r) - lo)
        j_last = np.floor(np.maximum(g_l, g_r) - hi)
        n_child = j_last - j_first + 1
        if np.any(n_child < 1):
            raise ConstructionError(f"a sample has no child at level {k}")
        j = j_first + np.floor(rng.uniform(0, 1, count) * n_child)
        a = _solve_phase(left, right, k, j + lo, params, region.C_height)
        b = _solve_phase(left, right, k, j + hi, params, region.C_height)
        left, right = np.minimum(a, b), np.maximum(a, b)
    return left + rng.uniform(0, 1, count) * (right - left)


def box_counts(left, right, exponents):
    """Number of dyadic boxes of side ``2**-j`` meeting the union of intervals."""
    order = np.argsort(left)
    left, right = np.asarray(left)[order], np.asarray(right)[order]
    out = []
    for j in exponents:
        scale = 2.0**j
        i_lo = np.floor(left * scale)
        i_hi = np.floor(right * scale)
        reach = np.maximum.accumulate(i_hi)
        start = np.concatenate([[True], i_lo[1:] > reach[:-1]])
        seg_lo = i_lo[start]
        seg_hi = np.maximum.reduceat(i_hi, np.flatnonzero(start))
        out.append(int(np.sum(seg_hi - seg_lo + 1)))
    return np.array(out)


@dataclass(frozen=True)
class BoxDimension:
    slope: float
    r_squared: float
    window: tuple
    global_slope: float
    exponents: np.ndarray
    counts: np.ndarray


def box_dimension(left, right, exponents=None, width=3):
    """Box-counting slope over the ``width``-point window of best linear fit.

    Windows containing a plateau of the count are skipped, since there the
    resolution does not see new structure.  ``global_slope`` is the least
    squares slope over the whole ladder.  Both are finite-resolution proxies,
    not Hausdorff dimensions.
    """
    left = np.asarray(left, dtype=float)
    right = np.asarray(right, dtype=float)
    if exponents is None:
        finest = int(math.floor(-math.log2(np.min(right - left))))
        exponents = np.arange(1, max(finest, width) + 1)
    exponents = np.asarray(exponents)
    if exponents.size < width:
        raise DomainError(f"need at least {width} resolutions, got {exponents.size}")
    counts = box_counts(left, right, exponents)
    x = exponents * math.log(2)
    y = np.log(counts)
    global_slope = float(np.polyfit(x, y, 1)[0])
    best = (float("nan"), float("nan"), None)
    for i in range(len(x) - width + 1):
        xs, ys = x[i:i + width], y[i:i + width]
        if np.any(np.diff(ys) <= 0):
            continue
        fit_slope = np.polyfit(xs, ys, 1)[0]
        r2 = np.corrcoef(xs, ys)[0, 1] ** 2
        if best[2] is None or r2 > best[1]:
            best = (float(fit_slope), float(r2), (int(exponents[i]), int(exponents[i + width - 1])))
    return BoxDimension(best[0], best[1], best[2], global_slope, exponents, counts)
