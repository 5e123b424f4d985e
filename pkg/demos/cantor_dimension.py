"""Running dimensions of nested preimage constructions.

Run: python3 demos/cantor_dimension.py
"""
import math

from fermimap.core import SystemParams
from fermimap.fractal import (
    Fn_derivative,
    box_dimension,
    build_cantor,
    default_region,
    escape_candidate_tree,
    level_dimensions,
    lower_bounds,
    model_maps,
    region_interval,
    running_dimension,
    sample_escape_candidates,
)

# x -> 3x keeps two of three branches: the middle-third set.
tree = build_cantor(model_maps([3] * 10), (0.0, 1.0 - 1e-9), 10)
print(f"middle third at depth 10: {running_dimension(tree, 10).min():.6f} (log2/log3 = {math.log(2) / math.log(3):.6f})")

# Slopes 2n + 2 grow without bound, so the running dimension climbs towards 1.
tree = build_cantor(model_maps([2 * n + 2 for n in range(1, 8)]), (0.0, 0.9), 7)
for n, (d, b) in enumerate(zip(level_dimensions(tree), lower_bounds(tree)), 1):
    print(f"  level {n}: K={tree.K[n]:8d} running dimension {d:.3f}, lower bound {b:.3f}")

# Phases on the curve v = 20 + 2 phi'(t) whose images keep landing where
# the wall accelerates the ball and the map is hyperbolic.
params = SystemParams(A=0.5, C=1.0, gamma=1.5)
region = default_region(params, 20.0)
J0 = region_interval(params, region)
esc = escape_candidate_tree(params, region, J0, 4)
print(f"\nescape window J0 = ({J0[0]:.4f}, {J0[1]:.4f})")
for n in range(1, 5):
    lvl = esc.levels[n]
    box = box_dimension(lvl.left, lvl.right)
    print(f"  depth {n}: {len(lvl):7d} intervals, running dimension {running_dimension(esc, n).min():.3f}, "
          f"box slope {box.global_slope:.3f}")

ts = sample_escape_candidates(params, region, J0, 8, 1000, rng=0)
for n in (1, 4, 8):
    r = Fn_derivative(ts, n, region.C_height, params, region)
    print(f"  |F_{n}'| in [{r.value.min():.3g}, {r.value.max():.3g}], bounds [{r.lower_bound:.3g}, {r.upper_bound:.3g}]")
