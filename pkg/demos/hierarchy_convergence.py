"""Multi-state models converge to the Born rule as eta shrinks.

The sequential and bisection models decide one stage at a time. A small eta
slows the later stages so each decision sees the earlier ones finished.
The deviation from the Born weights falls roughly in proportion to eta.
"""

# %%
from dqsr import IntegratorConfig, ModelSpec, sweep

n = 4000  # raise for tighter error bars; each eta value costs a full ensemble

# %% Sequential, three states
table = sweep([0.3, 0.65, 0.05], ModelSpec("sequential", 3), IntegratorConfig(), "eta", [0.2, 0.1, 0.05], n,
              master_seed=1, dts=[0.01, 0.01, 0.005])
for eta, dev, se in table.points:
    print(f"sequential eta={eta:<5} deviation {dev:.4f} +- {se:.4f}")

# %% Bisection, four states
table = sweep([0.7, 0.1, 0.03, 0.17], ModelSpec("bisection", 4), IntegratorConfig(), "eta", [0.2, 0.05], n,
              master_seed=2024, dts=[0.01, 0.005])
for eta, dev, se in table.points:
    print(f"bisection  eta={eta:<5} deviation {dev:.4f} +- {se:.4f}")
