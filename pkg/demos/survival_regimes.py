"""Weak and strong coupling to a continuum: exponential decay, power-law tail, and a bound state.

    python demos/survival_regimes.py
"""

import math

import numpy as np

from rwaqubit.bath import SpectralDensity
from rwaqubit.friedrichs import bound_state, cut_pole_identity, decay_rate, solve_survival, tail_fit

Omega = 1.0

# wide flat band: golden-rule decay
J = SpectralDensity.flat(0.005, 0.0, 20.0)
t = np.linspace(0.0, 192.0, 38401)
s = solve_survival(J, Omega, t)
G = decay_rate(J, Omega)
print(f"flat band   rate {G:.5f}  |U|/exp(-G t/2) - 1 at end: {abs(s.U[-1]) / math.exp(-G * t[-1] / 2) - 1:+.4f}")

# weak ohmic: no pole, the amplitude dies out like 1/t^2
J = SpectralDensity.ohmic(0.1, 1.0, 1.0)
s = solve_survival(J, Omega, np.linspace(0.0, 400.0, 8001))
rep = tail_fit(s, J, Omega)
print(f"weak ohmic  int J/w = {J.inverse_moment():.2f} < Omega, tail exponent {rep.exponent:.3f}, "
      f"prefactor {rep.prefactor:.4f} vs {rep.expected_prefactor:.4f}")

# strong ohmic: a bound state below the band keeps part of the excitation forever
J = SpectralDensity.ohmic(1.5, 1.0, 1.0)
pole = bound_state(J, Omega)
s = solve_survival(J, Omega, np.linspace(0.0, 200.0, 10001))
ident = cut_pole_identity(J, Omega)
print(f"strong ohmic int J/w = {J.inverse_moment():.2f} > Omega, s_I = {pole.s_I:.5f}, Z = {pole.Z:.5f}")
print(f"             late |U|^2 mean {np.mean(s.probability[-5000:]):.5f} vs Z^2 {pole.Z ** 2:.5f}")
print(f"             cut {ident.cut:.6f} + Z {ident.pole_weight:.6f} = {ident.cut + ident.pole_weight:.6f}")
