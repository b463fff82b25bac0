"""Three resonant modes at beta Omega = ln 2: how far a small thermal bath gets toward equilibrium.

The exact map stays valid everywhere and its generator reproduces it where D > 0,
but three modes recur long before the qubit settles: populations, ratios and
D drift away from the equilibrium predictions.

    python demos/thermal_window.py
"""

from rwaqubit.dynmap import populations
from rwaqubit.exact import SectorBasis, map_coefficients
from rwaqubit.gkls import rates_from_map
from rwaqubit.scenario import load_preset
from rwaqubit.thermo import asymptotic_populations, equilibrium_report

sc = load_preset("ohmic_thermal")
params, bath = sc.params, sc.bath()
print("modes", bath.omega.round(4), "couplings", bath.g.round(4))
c = map_coefficients(bath, params, SectorBasis(bath.n_modes, 16), sc.times)
g = rates_from_map(c)
pe = populations(c, (1.0, 0.0))[:, 0]
rep = equilibrium_report(c, g, params, pe)

print(f"rates valid and D > 0 up to t = {c.t[g.leading_window(0.0) - 1]:.2f} of {c.t[-1]:.0f}")
print(f"target p_e {asymptotic_populations(params)[0]:.4f}, tail p_e {rep.p_excited_tail:.4f}")
print(f"G-/G+ tail median {rep.balance_ratio_tail:.3f} (target {rep.balance_target:.0f})")
print(f"(1-alpha)/alpha {rep.ratio_lower_tail:.3f} (target 0.5), (1-xi)/xi {rep.ratio_upper_tail:.3f} (target 2)")
print("\n    t      p_e      D")
for i in range(0, len(c.t), 80):
    print(f"{c.t[i]:5.0f}  {pe[i]:.4f}  {c.D[i]:+.4f}")
