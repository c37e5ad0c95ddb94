"""The continuum random field and its marginal distribution.

At a fixed point x the field is a weighted sum of independent uniform draws.
For small eta the first draw dominates and the density is flat. As eta
grows the later draws add in and the density turns bell-shaped.
"""

# %%
from pathlib import Path

import numpy as np

from dqsr import FieldSpec, SeedSpec, field_pdf_histogram
from dqsr.io import write_svg

series = []
for eta in (0.02, 0.2, 0.5):
    h = field_pdf_histogram(FieldSpec(eta), 0.25, 50000, 40, SeedSpec(3))
    series.append((f"eta={eta}", h.centers, h.density))
    centre = h.density[np.argmin(np.abs(h.centers))]
    near_edge = h.density[np.argmin(np.abs(h.centers - 0.9))]
    print(f"eta={eta:<4} density at 0: {centre:.3f}  at 0.9: {near_edge:.3f}")

# %% Overlay the three densities
out = Path("field_pdf_demo.svg")
write_svg(out, series, {"x": 0.25, "samples": 50000}, title="field density", xlabel="field value", ylabel="density")
print("wrote", out)
