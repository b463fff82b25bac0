"""One resonant mode in the vacuum: the exact map, its generator and the survival solver side by side.

    python demos/jc_closed_form.py
"""

import numpy as np

from rwaqubit.bath import ModelParams, SpectralDensity, discretize
from rwaqubit.exact import SectorBasis, map_coefficients
from rwaqubit.friedrichs import solve_survival
from rwaqubit.gkls import rates_from_map

g = 0.1
t = np.linspace(0.0, 30.0, 601)
J = SpectralDensity.single(1.0, g)

c = map_coefficients(discretize(J, 1), ModelParams(1.0), SectorBasis(1, 2), t)
rates = rates_from_map(c)
U = solve_survival(J, 1.0, t).U

print(f"max |xi - cos^2 gt|       {np.max(np.abs(c.xi - np.cos(g * t) ** 2)):.2e}")
print(f"max |U - cos gt|          {np.max(np.abs(U - np.cos(g * t))):.2e}")

# the decay rate blows up as the excited amplitude passes through zero at gt = pi/2
print("\n   g t     G-(t)     2g tan(gt)")
for i in range(0, 161, 20):
    print(f"{g * t[i]:6.2f}  {rates.gamma_minus[i]:9.5f}  {2 * g * np.tan(g * t[i]):9.5f}")
print(f"first masked point: g t = {g * t[np.argmin(rates.valid)]:.3f}")
