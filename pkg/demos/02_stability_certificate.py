"""
A Lyapunov certificate over the delay distribution
==================================================

The closed loop switches between a dropout branch and an arrival branch
whose matrix depends on the round-trip delay.  Gridding the delay density
turns mean-square stability into two linear matrix inequalities in Q.
"""

import numpy as np

from dualrate_ncs import build_closed_loop, check_feasibility, default_scenario, grid_delays
from dualrate_ncs.network import DelayModel
from dualrate_ncs.stability import spectral_radius

s = default_scenario()
cl = build_closed_loop(s.plant, s.gains, s.timing, reduced=True)

# with exact predictions every branch reproduces the nominal loop, so all
# radii coincide; the full form (reduced=False) keeps the plant copies apart
grid = grid_delays(s.delay, 20)
radii = [spectral_radius(cl.a_cl_1(tau)) for tau in grid.points]
print(f"nominal radius {spectral_radius(cl.a_cl_1(grid.points[0])):.4f}, "
      f"arrival branch radii in [{min(radii):.4f}, {max(radii):.4f}], "
      f"dropout branch {spectral_radius(cl.a_cl_0):.4f}")

cert = check_feasibility(cl, grid)
print(cert.summary())
with np.printoptions(precision=4, suppress=True):
    print(cert.q)

# a larger delay bound is still certified as long as it stays below NT
wide = grid_delays(DelayModel(0.04, 0.01, 0.15), 20)
print("tau_max = 0.15 s:", check_feasibility(cl, wide).summary())
