"""How often the arithmetic window condition is met, and what the partial sums predict.

Run: python3 demos/arithmetic_windows.py
"""
from fermimap.arithmetic import (
    ArithmeticParams,
    island_measure_series,
    measure_partial_sum,
    monte_carlo_partial_sum,
    pair_correlation,
    regime,
    scan,
)

params = ArithmeticParams()
print("defaults:", params)
print("regime:", regime(params).predicted_class.value)

# Hit counts keep growing for every sampled parameter value.
for a in (0.5, 0.7, 0.9):
    counts = [scan(params.with_a(a), N)[1] for N in (10**3, 10**4, 10**5)]
    print(f"a={a}: hits up to 1e3, 1e4, 1e5 -> {counts}")

# Exact interval-union measure against the power law and a Monte Carlo check.
r = measure_partial_sum(params, 10**5)
mc = monte_carlo_partial_sum(params, 10**5, samples=10**6, rng=1)
print(f"\npartial sum at N=1e5: exact {r['exact_sum']:.2f}, power law {r['asymptotic']:.2f}, "
      f"Monte Carlo {mc['estimate']:.2f} +- {mc['stderr']:.2f}")

pc = pair_correlation(params, 10**4)
print(f"pair-correlation ratio at N=1e4: {pc['ratio']:.4f}")

# The refined island-measure series converges above gamma = 4/3.
for gamma in (1.25, 4 / 3, 1.5):
    s = island_measure_series(gamma, 10**6)
    sums = ", ".join(f"{v:.4g}" for v in s["partial_sums"].values())
    print(f"gamma={gamma:.4f}: {s['verdict']:9s} partial sums by decade {sums}")
