"""Single-lambda model: one number in [0, 1] picks the outcome.

The unit interval splits into consecutive blocks whose widths are the Born
weights. Any lambda inside block j sends the state to pointer j.
"""

# %%
import numpy as np

from dqsr import Convention, IntegratorConfig, ModelSpec, StochasticDraw, run_batch, run_ensemble, separatrix_values

w = np.array([0.1, 0.2, 0.3, 0.4])
model = ModelSpec("single_lambda", 4)
cfg = IntegratorConfig()

edges = separatrix_values(w)
print("block edges", edges)

# %% Sweep lambda across the interval and watch the outcome step up at each edge
lam = np.linspace(0.01, 0.99, 50)
res = run_batch(w, model, cfg, StochasticDraw(lam[:, None], Convention.LAMBDA))
print("outcome by lambda:", "".join(str(o) for o in res.outcomes))
print("predicted        :", "".join(str(int(np.searchsorted(edges, x))) for x in lam))

# %% Evenly spaced draws reproduce the weights to within the grid spacing
rep = run_ensemble(w, model, cfg, 1000, master_seed=0, stratified=True)
print("stratified frequencies", rep.frequencies, "deviation", rep.final_deviation)
