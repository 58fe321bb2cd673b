"""
Running the loop in real time over UDP
======================================

Both roles run in this process on 127.0.0.1; delay and loss are injected
in software.  The same thing across two shells:

    dualrate-ncs live-remote --bind 0.0.0.0:47001 --peer 127.0.0.1:47000
    dualrate-ncs live-local  --bind 0.0.0.0:47000 --peer 127.0.0.1:47001 --out live.csv
"""

import numpy as np

from dualrate_ncs import compute_j1_j2, default_scenario, run_simulation
from dualrate_ncs.live import run_loopback

s = default_scenario(duration=10.0)
live, remote = run_loopback(s)
print(f"remote served {len(remote.seqs)} periods, "
      f"{sum(remote.measured)} with a measurement, {sum(remote.dropped_rl)} replies dropped")

rep = compute_j1_j2({"nominal": run_simulation(s.with_(mode="nominal")),
                     "no_prediction": run_simulation(s.with_(mode="no_prediction")),
                     "live": live})
print(f"live run: J1 = {rep.j1['live']:.2f}, J2 = {rep.j2['live']:.2f}, fallback = {live.fallback}")
print(f"round trips {np.nanmin(live.tau) * 1e3:.1f} to {np.nanmax(live.tau) * 1e3:.1f} ms")
