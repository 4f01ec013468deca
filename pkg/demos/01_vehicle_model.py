"""The vehicle model the planner drives.

A dynamic bicycle with linear tires: steering makes the front tire slip, the
slip makes lateral force, and the force turns the car. This script walks
through one steering input and shows the two properties the planner leans on:
RK4 is accurate at the 0.1 s planning step, and splitting a shooting interval
into sub-steps converges to the same answer.

    python3 demos/01_vehicle_model.py
"""
import numpy as np

from strhc import VehicleParams, VehicleState
from strhc import dynamics

P = VehicleParams()

# A car cruising straight at 15 m/s in lane center y = -2.
x = VehicleState(px=0.0, py=-2.0, phi=0.0, v_lon=15.0, v_lat=0.0, omega=0.0)

print("Tire forces for a small steering input")
for steer in (0.0, 0.02, 0.05):
    ff, fr = dynamics.tire_forces(x, (0.0, steer), P)
    print(f"  delta = {steer:.2f} rad -> front {ff + 0.0:9.1f} N, rear {fr + 0.0:9.1f} N")

# Hold delta = 0.05 for two seconds at the planning step and watch the car turn.
print("\nHolding delta = 0.05 rad for 2 s (RK4, dt = 0.1 s)")
state = x
for k in range(20):
    state = dynamics.rk4_step(state, (0.0, 0.05), 0.1, P)
    if (k + 1) % 5 == 0:
        print(f"  t = {0.1 * (k + 1):.1f}s  x = {state.px:6.2f}  y = {state.py:6.2f}  "
              f"heading = {np.degrees(state.phi):5.1f} deg  yaw rate = {state.omega:.3f} rad/s")

# The planner uses one RK4 step per 0.1 s interval. How far is that from a
# much finer integration of the same interval?
print("\nOne 0.1 s interval integrated with 1, 2, 4 and 1000 sub-steps")
ref = np.array(dynamics.shoot_interval(state, (0.5, 0.05), 0.1, 1000, P))
for n in (1, 2, 4):
    approx = np.array(dynamics.shoot_interval(state, (0.5, 0.05), 0.1, n, P))
    print(f"  {n} sub-step(s): max state error {np.max(np.abs(approx - ref)):.2e}")
