"""Two pointer states: one trajectory, then an ensemble.

A single realisation of the collapse dynamics is a deterministic flow once
its random draw is fixed. Averaging over draws recovers the Born weights.
"""

# %%
import numpy as np

from dqsr import IntegratorConfig, ModelSpec, SeedSpec, run_ensemble, run_trajectory

w = np.array([0.25, 0.75])
model = ModelSpec("two_state", 2)
cfg = IntegratorConfig(dt=0.005)

# %% One trajectory. The draw decides the outcome before anything moves.
rec = run_trajectory(w, model, cfg, seed=SeedSpec(1))
print(f"draw {rec.draws.values.ravel()[0]:+.3f} -> outcome {rec.outcome} after {rec.steps_taken} steps")
for t, weights in zip(rec.times[::200], rec.weights[::200]):
    print(f"  t={t:6.2f}  w={np.round(weights, 4)}")

# %% Many trajectories: outcome frequencies against the Born weights
rep = run_ensemble(w, model, cfg, 5000, master_seed=1)
print("frequencies", rep.frequencies, "target", w)
print(f"deviation {rep.final_deviation:.4f} (one standard error {rep.stderr:.4f})")
