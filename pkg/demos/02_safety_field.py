"""How the planner sees a neighbouring car.

Each surrounding vehicle sits inside an ellipse (3 m long, 2 m wide). The
barrier value h is zero on the ellipse, negative inside (a collision) and
grows with distance. The safety cost pushes h above the margin c = 1 hard,
then fades; and its weight decays along the prediction horizon so distant
future conflicts matter less than imminent ones.

    python3 demos/02_safety_field.py
"""
import numpy as np

from strhc import SafetyParams
from strhc.safety import attention_weight, barrier_h, enhancement_B, spatial_H_of_h

sp = SafetyParams()
ev = (0.0, 0.0)

print("Barrier value for a car at various offsets (ego at the origin)")
for dx, dy in [(1, 0), (3, 0), (0, 2), (3, 2), (6, 0), (10, 4)]:
    h = barrier_h(ev, (dx, dy), sp)
    state = ("collision" if h < 0 else "touching" if h == 0 else "inside margin" if h < sp.c
             else "on the margin" if h == sp.c else "clear")
    print(f"  offset ({dx:>2}, {dy:>2}) m: h = {h:6.2f}  ({state})")

print("\nThe enhancement function switches from ~2 to ~0 right at the margin h = c")
for h in (0.0, 0.9, 1.0, 1.1, 2.0):
    print(f"  h = {h:3.1f}: B = {enhancement_B(h, sp):.5f}, kernel H = {spatial_H_of_h(h, sp):.5f}")

print("\nAttention weight for the nearest car along a 50-step horizon")
for k in (0, 5, 10, 25, 49):
    print(f"  step {k:>2}: {attention_weight(1, k, sp):9.1f}")
fixed = sp.fixed_attention()
print(f"  fixed-attention ablation keeps {attention_weight(1, 49, fixed):.1f} at every step")

# A small map of the kernel around the ego, to see the shape of the field.
xs = np.linspace(-8, 8, 33)
ys = np.linspace(-4, 4, 9)
h = barrier_h(np.stack(np.meshgrid(xs, ys), -1), np.zeros(2), sp)
# inside the ellipse (h < 0) the kernel is not meant to be evaluated; draw it as 'X'
grid = np.where(h < 0, np.inf, spatial_H_of_h(np.maximum(h, 0.0), sp))
print("\nKernel H around a car at the origin ('X' inside, '#' > 1, '+' > 0.1, '.' > 0.01)")
for row in grid[::-1]:
    print("  " + "".join("X" if v == np.inf else "#" if v > 1 else "+" if v > 0.1 else "." if v > 0.01 else " "
                         for v in row))
