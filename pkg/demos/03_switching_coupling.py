"""
Coupling that switches off and on
=================================

Piecewise-constant coefficients: X2 drives X1 on [0, 2), is cut off on
[2, 4) and comes back twice as strong from t = 4.  The noises are
correlated and the start is random.
"""

from pathlib import Path

import numpy as np

from gaussflow import di_curves, load_model, transfer_entropy_curve
from gaussflow.oracle import discrete_transfer_entropy_curve, discretize

here = Path(__file__).resolve().parent
model, part = load_model(here / "models" / "switching_coupling.json")
print("breakpoints:", model.breakpoints)

rate, dinf = di_curves(model, part, 6.0)
for t in (0.0, 1.0, 1.999, 2.0, 3.0, 4.0, 5.0, 6.0):
    i = min(np.searchsorted(rate.grid, t, side="right") - 1, len(rate.grid) - 1)
    print(f"t={rate.grid[i]:6.3f}  R={rate.values[i]:.6f}  D={dinf.values[i]:.6f}")

# While the coupling is off R drops to zero and D stalls
curve = transfer_entropy_curve(model, part, 1.0, 6.0)
chain = discretize(model, 1e-2, 6.0)
disc = discrete_transfer_entropy_curve(chain, part, 100, 600)
times = np.arange(100, 601) * 1e-2
cont = np.interp(times, curve.grid, curve.values)
for t in (1.5, 2.5, 3.5, 4.5, 6.0):
    i = round((t - 1.0) / 1e-2)
    print(f"T(1,{t}) = {cont[i]:.6f}   oracle {disc[i]:.6f}")
