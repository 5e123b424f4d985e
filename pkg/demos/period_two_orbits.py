"""Period-2 orbits of the static-wall map and the amplitude window where they are elliptic.

Run: python3 demos/period_two_orbits.py [output-dir]
"""
import sys
from collections import Counter
from pathlib import Path

import numpy as np

from fermimap.cli import stay_fraction, write_svg
from fermimap.core import SystemParams, forward
from fermimap.orbits import elliptic_A_window, find_plus_orbit, scan_orbits, stability, window_anchor

out = Path(sys.argv[1] if len(sys.argv) > 1 else ".")
out.mkdir(parents=True, exist_ok=True)

# Every period-2 orbit with flight times up to 8 at amplitude 1.3.
params = SystemParams(A=1.3, C=1.0, gamma=1.5)
catalog = scan_orbits(params, 8)
print(f"{len(catalog)} period-2 orbits with T <= 8")
counts = Counter((e.orbit.kind.value, e.report.classification.value) for e in catalog)
for (kind, cls), k in sorted(counts.items()):
    print(f"  {kind:5s} {cls:10s} {k}")

# A Plus orbit on labels (2, 10) is elliptic only in a thin amplitude band
# just below the point where it is born.
base = SystemParams(A=1.0, C=1.0, gamma=1.5, t0=-0.25)
lo, hi = elliptic_A_window(2, 10, base)
print(f"\nelliptic window for (2, 10): A in ({lo:.6f}, {hi:.6f}), anchor {window_anchor(2, 10, base):.6f}")
for A in np.linspace(lo, hi, 5)[1:-1]:
    p = base.with_A(A)
    rep = stability(find_plus_orbit(2, 10, p), p)
    print(f"  A={A:.6f} half-trace {rep.half_trace:+.4f}")

# Zoomed phase portrait around the upper orbit point.
p = base.with_A(0.5 * (lo + hi))
orb = find_plus_orbit(2, 10, p)
rng = np.random.Generator(np.random.PCG64(7))
half_t, half_v = 0.01, 0.004
window = (orb.p2.t - half_t, orb.p2.t + half_t, orb.p2.v - half_v, orb.p2.v + half_v)
r = rng.uniform(0, 1, 40) * 0.004
t = orb.p2.t + r * np.cos(np.linspace(0, np.pi, 40))
v = orb.p2.v + 0.3 * r * np.sin(np.linspace(0, np.pi, 40))
pts = []
for i in range(400):
    with np.errstate(invalid="ignore"):
        for _ in range(2):
            t, v = forward(t, v, p)
    dt = (t - orb.p2.t + 0.5) % 1.0 - 0.5
    inside = (np.abs(dt) < half_t) & (np.abs(v - orb.p2.v) < half_v)
    pts += [(0, i, orb.p2.t + d, w) for d, w in zip(dt[inside], v[inside])]
write_svg(out / "island-2-10.svg", pts, [orb.p2], window, 800, 400)
print(f"\nwrote {len(pts)} points to {out / 'island-2-10.svg'}")
print(f"share of seeds near p2 that stay close: {stay_fraction(orb.p2, p, 1e-3, 200, 1000, rng):.2f}")
