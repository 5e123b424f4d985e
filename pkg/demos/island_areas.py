"""Normal-form coefficients and island areas along a family of elliptic orbits.

Run: python3 demos/island_areas.py
"""
from fermimap.normal_form import (
    area_scaling,
    elliptic_catalog,
    island_area,
    mean_slope,
    nondegeneracy,
    rotation_frame,
    taylor_coeffs,
)

# One orbit per m, each tuned to half-trace -0.7 with its window near A = 1.
catalog = elliptic_catalog([8, 64, 512, 8192])
slopes, areas = [], []
print(" m      T'      |A3|/T'^1.5  |A7|/T'^3   omega        area")
for orb, p in catalog:
    T = mean_slope(orb, p)
    frame = rotation_frame(orb, p)
    c = taylor_coeffs(orb, p, frame=frame)
    nd = nondegeneracy(orb, p)
    ia = island_area(orb, p)
    slopes.append(T)
    areas.append(ia.area)
    print(f"{orb.m:5d} {T:7.2f} {abs(c.A3) / T**1.5:12.2f} {abs(c.A7) / T**3:10.1f} {nd.omega:12.4g} {ia.area:10.3e}")

print(f"\nlog-log slope of area against T': {area_scaling(slopes, areas):.3f}")
