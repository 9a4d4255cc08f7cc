"""
Information flow in a scalar pair
=================================

X2 is an Ornstein-Uhlenbeck process and X1 is driven by it:

    dX1 = (-X1 + X2) dt + dW1
    dX2 = -X2 dt + dW2

How fast does X1 learn about X2?
"""

import numpy as np

from gaussflow import (
    Partition2,
    constant_model,
    di_curves,
    di_rate,
    solve_are,
    transfer_entropy,
)
from gaussflow.oracle import discrete_transfer_entropy, discretize

b = np.array([[-1.0, 1.0], [0.0, -1.0]])
model = constant_model(b, np.eye(2))  # v = 0: both start at the origin
part = Partition2(1, 1)

# The filter Riccati equation here is q' = 1 - 2q - q^2.  Its stationary root
# gives the long-run rate R = q/2.
q_inf = solve_are(-1.0, 1.0, 1.0)[0, 0]
print("stationary q2        :", q_inf, "(sqrt(2) - 1 =", np.sqrt(2) - 1, ")")
print("rate R(20)           :", di_rate(model, part, 20.0))
print("stationary rate q/2  :", q_inf / 2)

# R starts at zero (X2(0) is known) and settles within a few time units
rate, dinf = di_curves(model, part, 10.0, step=1e-2)
for t in (0.0, 0.5, 1.0, 2.0, 5.0, 10.0):
    i = np.searchsorted(rate.grid, t)
    print(f"t={t:5.1f}  R={rate.values[i]:.6f}  D={dinf.values[i]:.6f}")

# Transfer entropy over a unit window.  This conditions on the X2 path over
# [s, t] only, so it sits well below the rate times the window length.
T = transfer_entropy(model, part, 6.0, 7.0)
print("T(6, 7)              :", T)

# Same quantity from the exactly sampled chain, a fully independent route
for dt in (1e-1, 1e-2, 1e-3):
    chain = discretize(model, dt, 7.0)
    Td = discrete_transfer_entropy(chain, part, round(6 / dt), round(7 / dt))
    print(f"oracle dt={dt:g}: {Td:.10f}  rel. diff {abs(Td - T) / T:.2e}")
