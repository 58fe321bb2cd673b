"""
Compensating delay and dropout with predicted actions
=====================================================

Three runs of the robot axis share one network realization: the ideal
loop, a loop that simply holds the last action when nothing arrives, and
the delay-independent controller that ships M predicted PI actions per
packet.
"""

import numpy as np

from dualrate_ncs import compute_j1_j2, default_scenario, run_simulation

# the default scenario is the robot axis 6.3 / (s (s + 17.7)), T = 0.1 s,
# N = 2, delays drawn from eta = 40 ms, phi = 10 ms, tau_max = 80 ms and
# 30 % loss on both links
s = default_scenario(seed=0)
print(s.delay, s.dropout, sep="\n")

traces = {mode: run_simulation(s.with_(mode=mode))
          for mode in ("nominal", "no_prediction", "delay_independent")}

# how rough was the network this time?
di = traces["delay_independent"]
lost = sum(p.drop_lr or p.drop_rl for p in di.periods)
print(f"{len(di.periods)} sensor periods, {lost} with a lost packet, "
      f"mean round trip {np.nanmean(di.tau) * 1e3:.1f} ms")

# accumulated error and overshoot against the ideal loop, normalized by the
# holding loop: 100 means the ideal response, 0 means no better than holding
rep = compute_j1_j2(traces)
for name in traces:
    print(f"{name:>18}: E_Y = {rep.e_y[name]:9.4g}  J1 = {rep.j1[name]:7.2f}  "
          f"O_Y = {rep.o_y[name]:8.3g}  J2 = {rep.j2[name]:7.2f}")

# where did the applied actions come from?  0 estimated, 1 actual, 2 hold
codes, counts = np.unique(di.provenance, return_counts=True)
print(dict(zip(codes.astype(int).tolist(), counts.tolist())))
