"""Cruising through dense IDM traffic.

Eighteen cars on six lanes, each following its leader with the Intelligent
Driver Model and cruising at 7-12 m/s. The ego wants 15 m/s in lane y = -2,
so it has to pass people. This runs 20 s of closed loop on one seed and
prints what happened: when it swerved, how close it got, how fast it solved.

    python3 demos/03_dense_cruise.py [seed]
"""
import sys

import numpy as np

from strhc import PlannerConfig
from strhc.runner import run_sim_episode
from strhc.sim import ScenarioConfig

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
log, rep = run_sim_episode(PlannerConfig(), ScenarioConfig(rng_seed=seed), duration=20.0)

print(f"seed {seed}: {log.status}, {len(log.records)} control periods")
print("\n  time    x      y     speed  accel  steer  min h   solver")
for r in log.records[::20]:
    print(f"  {r.time:4.1f} {r.ev[0]:6.1f} {r.ev[1]:6.2f} {r.ev[3]:6.2f} {r.applied[0]:6.2f} "
          f"{r.applied[1]:6.3f} {r.min_h:6.2f}  {r.guess_kind} ({r.iterations} it)")

escapes = [r for r in log.records if r.guess_kind in ("left", "right", "brake")]
print(f"\n{len(escapes)} periods used an escape guess (lane shift or brake) instead of the warm start")
print(f"closest approach: h = {rep.s_min:.3f} (0 is contact, 1 is the safety margin)")
print(f"speed error: mean {rep.e_mae:.3f} m/s, max {rep.e_max:.3f} m/s")
print(f"time in target lane: {100 * rep.pct_in_lane:.0f}%   travelled {rep.dist_long:.0f} m")
print(f"solve time: mean {rep.t_solve_avg:.1f} ms, max {1e3 * max(r.solve_time for r in log.records):.1f} ms")
lat = np.array([r.ev[1] for r in log.records])
print(f"lateral range: {lat.min():.2f} .. {lat.max():.2f} m")
