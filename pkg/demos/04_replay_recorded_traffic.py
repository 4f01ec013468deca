"""Driving through recorded traffic.

Recorded trajectories come as a CSV with columns vehicle_id,t,x,y and,
optionally, vx,vy. Recorded cars don't react to the ego; they just play back.
This script writes a synthetic recording with 46 vehicles (constant-velocity
tracks, 0.08 s sampling) to out/synthetic_traffic.csv, checks it, and drives
the planner through it at the recording's own rate (Ts = 0.08 s, N = 70).

The same file works from the command line:

    python3 demos/04_replay_recorded_traffic.py
    strhc validate out/synthetic_traffic.csv
    strhc run configs/replay.ini
"""
from pathlib import Path

from strhc import PlannerConfig, VehicleState
from strhc.replay import load_trajectories, save_trajectories, synthetic_dataset, world_at
from strhc.runner import replay_config, run_replay_episode

out = Path("out")
out.mkdir(exist_ok=True)
path = out / "synthetic_traffic.csv"
save_trajectories(synthetic_dataset(n_vehicles=46, duration=30.0, dt=0.08, seed=4), path)

ds = load_trajectories(path)
s = ds.summary()
print(f"{path}: {s['vehicles']} vehicles, {s['samples']} samples, "
      f"span {s['span'][0]:g}-{s['span'][1]:g} s, step {s['timestep']:g} s")

# Off-sample queries interpolate linearly between the recorded samples.
vid, sv = world_at(ds, 1.234)[0]
print(f"vehicle {vid} at t = 1.234 s: x = {sv.ox:.3f}, y = {sv.oy:.1f}, vx = {sv.ovx:.2f}")

# Recorded cars ignore the ego, so start it behind the recorded window
# (which begins at x = -40) and let it catch up with the traffic.
cfg = replay_config(PlannerConfig())
log, rep = run_replay_episode(cfg, ds, VehicleState(-60.0, -2.0, 0.0, 15.0, 0.0, 0.0), duration=20.0)
print(f"\n20 s replay: {log.status}, {len(log.records)} periods of {cfg.ocp.Ts} s")
print(f"closest approach h = {rep.s_min:.3f}, speed error {rep.e_mae:.3f} m/s, "
      f"in lane {100 * rep.pct_in_lane:.0f}%, mean solve {rep.t_solve_avg:.1f} ms")
