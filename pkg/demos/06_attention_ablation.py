"""What the decaying attention buys.

The safety weight on each neighbour decays along the horizon, so a car that
might be close in 4 s counts less than one that is close now. Freezing the
weight (the fixed-attention ablation) makes the planner treat every predicted
conflict as urgent. It then reacts more to conflicts that would have sorted
themselves out, and speed tracking usually suffers. Usually, not always: in the
ten-seed acceptance run the fixed weights track worse or equal on 9 seeds, and
seed 0 is the exception. Both errors are small because the ego starts at its
target speed and mostly steers around traffic. This compares both on the first
few seeds (about 20 s per seed).

    python3 demos/06_attention_ablation.py [n_seeds]
"""
import sys

from strhc import PlannerConfig
from strhc.runner import run_sim_episode
from strhc.sim import ScenarioConfig

n = int(sys.argv[1]) if len(sys.argv) > 1 else 3
print("seed   speed error (decaying)   speed error (fixed)   closest h (decaying / fixed)")
for seed in range(n):
    _, st = run_sim_episode(PlannerConfig(), ScenarioConfig(rng_seed=seed))
    _, fx = run_sim_episode(PlannerConfig(), ScenarioConfig(rng_seed=seed), ablation=True)
    print(f"  {seed}    {st.e_mae:10.4f} m/s            {fx.e_mae:10.4f} m/s         "
          f"{st.s_min:6.3f} / {fx.s_min:6.3f}")
