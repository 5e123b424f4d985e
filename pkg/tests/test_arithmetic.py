import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fermimap.arithmetic import (
    ArithmeticParams,
    Hit,
    MeasureClass,
    check_n,
    hit_intervals,
    interval_asymptotics,
    island_measure_series,
    measure_partial_sum,
    member,
    monte_carlo_partial_sum,
    orbit_form_member,
    pair_correlation,
    power_gap,
    regime,
    root_gap,
    sandwich_windows,
    scan,
    wave_ratio,
    window,
)
from fermimap.core import DomainError

P = ArithmeticParams()


def direct_member(a, n, params):
    """Extended-precision evaluation of the defining inequality."""
    with mpmath.workdps(60):
        g = mpmath.mpf(params.gamma)
        x = (mpmath.mpf(n) ** (1 / g) + mpmath.mpf(a)) ** g
        m = int(mpmath.floor(x))
        for mm in (m, m - 1):
            if mm < 1:
                continue
            w = mpmath.mpf(mm) ** (-mpmath.mpf(params.xi)) / mpmath.mpf(a)
            if mm + params.C1 * w < x < mm + params.C2 * w:
                return mm - n
    return None


@pytest.mark.parametrize(
    "kwargs",
    [dict(gamma=1.0), dict(C1=0.4, C2=0.2), dict(xi=-0.1), dict(alpha_lo=0.5, beta_hi=1.2), dict(a=0.0)],
)
def test_params_validation(kwargs):
    with pytest.raises(DomainError):
        ArithmeticParams(**kwargs)


def test_xi_defaults_to_plus_orbit_value():
    assert ArithmeticParams(gamma=3.0).xi == pytest.approx(2 / 3)


def test_window_example():
    p = ArithmeticParams(xi=0.5, C1=0.2, C2=0.4)
    assert window(1.0, 1, p) == pytest.approx((1.2, 1.4))


@pytest.mark.parametrize("m", [1, 7, 1000])
def test_window_scaling_in_a(m):
    lo, hi = window(0.6, m, P)
    lo2, hi2 = window(1.2, m, P)
    assert lo2 - m == pytest.approx((lo - m) / 2)
    assert hi2 - m == pytest.approx((hi - m) / 2)
    assert hi - lo == pytest.approx((P.C2 - P.C1) / 0.6 * m ** -P.xi)


def test_check_n_exact_integer_misses():
    assert check_n(4, ArithmeticParams(a=1.0, gamma=2.0)) is None


def test_check_n_example_hit():
    p = ArithmeticParams(a=0.5, gamma=2.0, xi=0.5, C1=0.2, C2=0.4)
    h = check_n(4, p)
    assert isinstance(h, Hit)
    assert h.k == 2 and h.value == pytest.approx(6.25)
    assert h.window == pytest.approx((6 + 0.4 / math.sqrt(6), 6 + 0.8 / math.sqrt(6)))
    assert direct_member(0.5, 4, p) == 2


def test_check_n_rejects_zero():
    with pytest.raises(DomainError):
        check_n(0, P)


@settings(max_examples=300, deadline=None)
@given(n=st.integers(1, 10**7), a=st.floats(0.3, 1.2), gamma=st.sampled_from([1.25, 1.5, 2.0, 3.0]))
def test_check_n_matches_extended_precision(n, a, gamma):
    p = ArithmeticParams(a=a, gamma=gamma)
    h = check_n(n, p)
    assert (None if h is None else h.k) == direct_member(a, n, p)
    if h is not None:
        assert h.window[0] < h.value < h.window[1]


@settings(max_examples=200, deadline=None)
@given(n=st.integers(1, 10**6), a=st.floats(0.3, 1.2))
def test_member_agrees_with_check_n(n, a):
    p = P.with_a(a)
    assert bool(member(a, n, p)) == (check_n(n, p) is not None)


def test_power_and_root_gap_are_inverse():
    n = np.array([1.0, 1e3, 1e9, 1e15])
    d = power_gap(n, 0.7, 1.5)
    assert np.allclose(root_gap(n, d, 1.5), 0.7, rtol=1e-12)


def test_scan_empty_for_zero():
    assert scan(P, 0) == ([], 0)


def test_scan_count_monotone_and_sorted():
    counts = [scan(P, N)[1] for N in (10, 100, 1000, 5000)]
    assert counts == sorted(counts)
    hits, _ = scan(P, 5000)
    assert [h.n for h in hits] == sorted(h.n for h in hits)


@pytest.mark.parametrize("a", np.linspace(0.5, 0.9, 5))
def test_overlapping_regime_keeps_hitting(a):
    p = P.with_a(a)
    hits, c4 = scan(p, 10**4)
    _, c5 = scan(p, 10**5)
    assert c5 > 3 * c4 > 0
    # hits come in bursts once per sweep of the fractional part through [0, 1);
    # a sweep takes about 2 n^(2/3) / a steps, which bounds every gap
    ns = np.array([h.n for h in scan(p, 10**5)[0]])
    gaps, end = np.diff(ns), ns[1:]
    sel = end > 1000
    assert np.all(gaps[sel] < 2 * end[sel] ** (2 / 3) / a)


def test_non_diverging_regime_stagnates():
    lengths = []
    for a in np.linspace(0.5, 0.9, 9):
        hits, _ = scan(ArithmeticParams(a=a, xi=1.5), 10**5)
        lengths.append(sum(h.n > 1000 for h in hits))
    assert sum(lengths) <= 2


@pytest.mark.parametrize(
    "gamma, xi, over, div, cls",
    [
        (1.5, None, True, True, MeasureClass.AllParameters),
        (3.0, None, False, True, MeasureClass.FullMeasure),
        (3.0, 2 - 2 / 3.0, False, False, MeasureClass.ZeroMeasure),
        (1.5, 2 / 3, False, True, MeasureClass.CriticalMixed),
        (1.2, 2 - 2 / 1.2, True, True, MeasureClass.AllParameters),
    ],
)
def test_regime_table(gamma, xi, over, div, cls):
    r = regime(ArithmeticParams(gamma=gamma, xi=xi))
    assert (r.overlapping, r.diverging, r.predicted_class) == (over, div, cls)


@settings(max_examples=300)
@given(gamma=st.floats(1.01, 10), xi=st.floats(0.01, 3))
def test_overlapping_implies_diverging(gamma, xi):
    r = regime(ArithmeticParams(gamma=gamma, xi=xi))
    assert not r.overlapping or r.diverging


@settings(max_examples=300)
@given(gamma=st.floats(1.01, 1.99))
def test_plus_orbit_exponent_always_overlaps_below_two(gamma):
    r = regime(ArithmeticParams(gamma=gamma))
    assert r.diverging and r.overlapping


@settings(max_examples=300)
@given(a=st.floats(0.5, 0.9), m=st.integers(1, 10**9))
def test_sandwich_windows_contain(a, m):
    lo, hi = window(a, m, P)
    (slo, shi), (blo, bhi) = sandwich_windows(m, P)
    assert slo <= lo * (1 + 1e-15) and hi <= shi * (1 + 1e-15)
    assert lo <= blo * (1 + 1e-15) and bhi <= hi * (1 + 1e-15)
    assert blo < bhi


def test_hit_k_within_Kn():
    for a in (0.5, 0.7, 0.9):
        for h in scan(P.with_a(a), 5000)[0]:
            klo, khi = interval_asymptotics(h.n, 1, P)["Kn_exact"]
            assert math.floor(klo) <= h.k <= khi


def _mid_k(n, p):
    lo, hi = interval_asymptotics(n, 1, p)["Kn_exact"]
    return int(0.5 * (lo + hi))


@pytest.mark.parametrize("n", [10**4, 10**5, 10**6])
def test_interval_asymptotics(n):
    r = interval_asymptotics(n, _mid_k(n, P), P)
    for exact, lead in (("delta_exact", "delta_E1"), ("Delta_exact", "Delta_E2"), ("Delta_bar_exact", "Delta_bar_E3")):
        assert abs(r[exact] - r[lead]) < 0.05 * abs(r[exact])
    lo, hi = r["delta_E1_bounds"]
    assert lo <= r["delta_E1"] <= hi
    assert r["Delta_bar_exact"] < 0


def test_Kn_count_ratio_tends_to_one():
    errs = []
    for n in (10**2, 10**4, 10**6, 10**8):
        r = interval_asymptotics(n, 1, P)
        errs.append(abs(r["Kn_count"] / (P.gamma * n ** (1 - 1 / P.gamma) * (P.beta_hi - P.alpha_lo)) - 1))
    assert errs[-1] < 0.01
    assert errs[-1] < errs[0]


def test_intervals_lie_inside_scan_range():
    n, k, left, right = hit_intervals(2000, P)
    assert np.all((left >= P.alpha_lo) & (right <= P.beta_hi) & (left < right))
    mid = 0.5 * (left + right)
    assert np.all(member(mid, n, P))


def test_partial_sum_monotone():
    r = measure_partial_sum(P, 10**4, checkpoints=[10, 100, 1000, 10**4])
    vals = list(r["checkpoints"].values())
    assert vals == sorted(vals)
    assert vals[-1] == r["exact_sum"]


def test_partial_sum_matches_monte_carlo_small():
    exact = measure_partial_sum(P, 2000)["exact_sum"]
    mc = monte_carlo_partial_sum(P, 2000, samples=200_000, rng=1)
    assert abs(mc["estimate"] - exact) < 5 * mc["stderr"] + 1e-12


def test_partial_sum_rejects_xi_one():
    with pytest.raises(DomainError):
        measure_partial_sum(ArithmeticParams(xi=1.0), 100)


def test_non_diverging_partial_sum_tail():
    p = ArithmeticParams(xi=1.5)
    cps = measure_partial_sum(p, 10**5, checkpoints=[10**4, 10**5])["checkpoints"]
    inc = cps[10**5] - cps[10**4]
    tail = p.ell_mid / (p.xi - 1) * ((10**4) ** (1 - p.xi) - (10**5) ** (1 - p.xi))
    assert 0.5 * tail < inc < 2 * tail


def test_pair_correlation_brute_force():
    n, _, left, right = hit_intervals(200, P)
    span = P.beta_hi - P.alpha_lo
    ov = np.maximum(0, np.minimum(right[:, None], right[None, :]) - np.maximum(left[:, None], left[None, :]))
    r = pair_correlation(P, 200)
    assert r["double_sum"] == pytest.approx(ov.sum() / span, rel=1e-9)
    assert r["squared_single_sum"] == pytest.approx(((right - left).sum() / span) ** 2, rel=1e-9)


def test_pair_correlation_budget_gives_partial_result():
    r = pair_correlation(P, 2000, max_intervals=1000)
    assert r["partial"] and r["N"] < 2000


def test_wave_ratio_no_waves_at_N_equal_n():
    assert wave_ratio(100, 3, 1, P, N=100)["P"] == 0


@pytest.mark.parametrize("xi, decreasing", [(1 / 3, False), (1.0, True)])
def test_wave_ratio_trend_follows_exponent_sign(xi, decreasing):
    p = ArithmeticParams(xi=xi)
    vals = [wave_ratio(10**4, 20, q, p)["formula"] for q in (1, 10, 100, 1000)]
    assert (np.diff(vals) < 0).all() == decreasing


def test_wave_ratio_formula_vs_exact():
    n = 10**4
    k = _mid_k(n, P)
    Pmax = wave_ratio(n, k, 1, P, N=10**6)["P"]
    for q in sorted({1, 5, 20, int(Pmax)}):
        r = wave_ratio(n, k, q, P)
        assert abs(r["formula"] - r["exact"]) < 0.1 * r["exact"]


def test_wave_ratio_rejects_non_positive():
    with pytest.raises(DomainError):
        wave_ratio(10, 0, 1, P)


@pytest.mark.parametrize(
    "gamma, verdict, crude",
    [(1.5, "Finite", "Divergent"), (4 / 3, "Divergent", "Divergent"), (1.25, "Divergent", "Divergent"),
     (1.6, "Finite", "Finite"), (1.4, "Finite", "Divergent")],
)
def test_island_series_verdicts(gamma, verdict, crude):
    r = island_measure_series(gamma, 1000)
    assert r["verdict"] == verdict and r["crude_verdict"] == crude


def test_island_series_exponent_at_three_halves():
    assert island_measure_series(1.5, 10)["refined_exponent"] == pytest.approx(-2.0)


@pytest.mark.parametrize("gamma, K", [(2.0, 100), (1.0, 100), (1.5, 5)])
def test_island_series_rejects(gamma, K):
    with pytest.raises(DomainError):
        island_measure_series(gamma, K)


def test_island_series_partial_sums():
    fin = island_measure_series(1.5, 10**6)["partial_sums"]
    assert fin[10**6] - fin[10**5] < 1e-5
    assert fin[10**6] == pytest.approx(math.pi**2 / 6, abs=2e-6)
    crit = island_measure_series(4 / 3, 10**6)["partial_sums"]
    incs = np.diff([crit[10**j] for j in range(1, 7)])
    # harmonic growth: each decade adds ln 10
    assert np.allclose(incs[-3:], math.log(10), rtol=1e-3)


@settings(max_examples=50, deadline=None)
@given(gamma=st.floats(1.05, 1.95))
def test_island_series_sums_monotone(gamma):
    s = island_measure_series(gamma, 10**4)["partial_sums"]
    vals = [s[k] for k in sorted(s)]
    assert vals == sorted(vals)


def test_orbit_form_member_matches_shifted_window():
    A, n = 0.35, 40
    x = (n + 0.5) + float(power_gap(n + 0.5, 2 * A, 1.5))
    m = math.floor(x) + 1
    xi = 1 - 1 / 1.5
    gap = (m - 0.5 - x) * A * m**xi
    assert gap > 0
    q = ArithmeticParams(gamma=1.5, C1=0.5 * gap, C2=1.5 * gap, alpha_lo=0.5, beta_hi=0.9)
    assert orbit_form_member(n, m, A, q)
    assert not orbit_form_member(n, m + 1, A, q)
