"""
Distributed sampling: nodes versus batch size
=============================================

c nodes each picking tau examples behave almost like a single node
picking c*tau, so iteration counts T(c, tau) are near-constant along
the curves c*tau = const.
"""
from quartz.analysis import contour_grid, log_grid
from quartz.io import synth_instance

n = 4096
m = synth_instance(n, 512, 0.02, seed=5, normalize=True)
rows = contour_grid(m, 1 / n, 1.0, log_grid(64, 7), log_grid(64, 7))

print("   c   tau   c*tau     T(c,tau)   speedup")
for c, tau, T, s in sorted(rows, key=lambda r: (r[0] * r[1], r[0])):
    print(f"{c:4d} {tau:5d} {c * tau:7d} {T:12.1f} {s:9.2f}")
