"""Scenario orchestration: bath -> exact map -> generator -> diagnostics, or the survival analysis."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .dynmap import apply_map, basis_states, check_coefficients, populations, trace_distance, validity_report
from .exact import (SectorBasis, TruncationError, map_coefficients, mode_occupations,
                    truncation_health)
from .friedrichs import (bound_state, cut_pole_identity, decay_rate, solve_survival, tail_fit,
                         upper_bound_state)
from .gkls import integrate_gkls, rates_from_map
from .scenario import Scenario
from .thermo import equilibrium_report, reservoir_return, van_hove_collapse


@dataclass
class Table:
    columns: list
    data: list          # one array per column

    def __post_init__(self):
        if len(self.columns) != len(self.data):
            raise ValueError("column/data length mismatch")


@dataclass
class RunResult:
    tables: dict = field(default_factory=dict)
    records: dict = field(default_factory=dict)
    manifest: dict = field(default_factory=dict)


TOLERANCES = {
    "unitarity_sum": 1e-8,
    "schwarz": 1e-10,
    "trace": 1e-10,
    "positivity": -1e-12,
    "closure_trace_distance": 1e-6,
    "rate_self_test": 1e-2,
    "pole_residual": 1e-10,
    "norm_residual": 1e-6,
}


PLATEAU_MIN = 1e-8


def run(sc: Scenario, threads: int = 1) -> RunResult:
    if sc.pipeline == "thermal":
        res = run_thermal(sc, threads)
    else:
        res = run_survival(sc)
    res.manifest = {
        "package": "rwaqubit",
        "version": __version__,
        "pipeline": sc.pipeline,
        "config_sha256": sc.config_hash(),
        "config": sc.normalized(),
        "tolerances": TOLERANCES,
        **res.manifest,
    }
    return res


def _check_health(sc: Scenario, bath) -> float:
    tr = sc.config["truncation"]
    health = truncation_health(bath, sc.params, tr["max_excitations"])
    if health < tr["min_weight"]:
        raise TruncationError(health, tr["min_weight"], tr["max_excitations"])
    return health


def run_thermal(sc: Scenario, threads: int = 1) -> RunResult:
    cfg = sc.config
    params, bath = sc.params, sc.bath()
    M = cfg["truncation"]["max_excitations"]
    min_w = cfg["truncation"]["min_weight"]
    health = _check_health(sc, bath)
    t = sc.times
    basis = SectorBasis(bath.n_modes, M)
    c = map_coefficients(bath, params, basis, t, min_weight=min_w, threads=threads)
    check_coefficients(c)
    rho0 = sc.initial_state
    exact = apply_map(c, rho0)
    g = rates_from_map(c, cfg["gkls"]["d_min"], self_test=cfg["gkls"]["self_test"])
    n = g.leading_window()
    gk = np.full((len(t), 2, 2), np.nan, dtype=complex)
    if n >= 4:
        gk[:n] = integrate_gkls(g, rho0)

    res = RunResult()
    res.tables["coefficients"] = Table(
        ["t", "alpha", "xi", "gamma", "zeta", "eta_re", "eta_im", "D"],
        [t, c.alpha, c.xi, c.gamma, c.zeta, c.eta.real, c.eta.imag, c.D])
    res.tables["rates"] = Table(
        ["t", "gamma_plus", "gamma_minus", "gamma_z", "G", "valid"],
        [t, g.gamma_plus, g.gamma_minus, g.gamma_z, g.G, g.valid.astype(int)])
    res.tables["trajectory"] = Table(
        ["t", "exact_ee", "exact_eg_re", "exact_eg_im", "exact_gg",
         "gkls_ee", "gkls_eg_re", "gkls_eg_im", "gkls_gg"],
        [t, exact[:, 0, 0].real, exact[:, 0, 1].real, exact[:, 0, 1].imag, exact[:, 1, 1].real,
         gk[:, 0, 0].real, gk[:, 0, 1].real, gk[:, 0, 1].imag, gk[:, 1, 1].real])

    closure = _closure(c, g, cfg["gkls"]["closure_d_floor"])
    res.records["diagnostics"] = {
        "validity": validity_report(c, rho0),
        "rate_self_test": g.self_test,
        "valid_window_end": float(t[n - 1]) if n else math.nan,
        "closure": closure,
    }

    if not params.is_vacuum:
        pe = populations(c, (float(rho0[0, 0].real), float(rho0[1, 1].real)))[:, 0]
        rep = equilibrium_report(c, g, params, pe)
        rep.extras["weak_coupling"] = params.lam <= cfg["thermo"]["weak_coupling_lambda"]
        if cfg["thermo"]["reservoir"]:
            occ = mode_occupations(bath, params, basis, rho0, t, min_weight=min_w, threads=threads)
            rr = reservoir_return(t, occ, c.D)
            rep.reservoir_return_time, rep.reservoir_D_at_return = rr.return_time, rr.D_at_return
            rep.extras["reservoir_peak_deviation"] = rr.peak
            rep.extras["reservoir_peak_time"] = rr.peak_time
            res.tables["reservoir"] = Table(["t"] + [f"n_{k}" for k in range(bath.n_modes)],
                                            [t] + [occ[:, k] for k in range(bath.n_modes)])
        if cfg["thermo"]["van_hove"]:
            rep.collapse_error = _van_hove(sc, pe, threads)
        res.records["equilibrium"] = rep.as_dict()

    conv = None
    if cfg["truncation"]["convergence_check"]:
        c2 = map_coefficients(bath, params, SectorBasis(bath.n_modes, M + 1), t, min_weight=min_w,
                              threads=threads)
        conv = {"M": M, "alpha": float(np.max(np.abs(c.alpha - c2.alpha))),
                "xi": float(np.max(np.abs(c.xi - c2.xi))),
                "eta": float(np.max(np.abs(c.eta - c2.eta)))}
    res.manifest = {"truncation_health": health, "convergence_M_vs_M_plus_1": conv,
                    "modes": bath.n_modes, "max_excitations": M}
    return res


def _closure(c, g, d_floor) -> dict:
    """Sup trace distance between integrated generator and exact map over the four basis states."""
    n = g.leading_window(d_floor)
    if n < 4:
        return {"window_end": math.nan, "max_trace_distance": math.nan}
    worst = 0.0
    for rho in basis_states():
        worst = max(worst, float(np.max(trace_distance(integrate_gkls(g, rho, c.t[:n]), apply_map(c, rho)[:n]))))
    return {"window_end": float(c.t[n - 1]), "max_trace_distance": worst}


def _van_hove(sc: Scenario, pe, threads) -> float:
    tm = sc.config["time"]
    lam = sc.params.lam
    half = sc.with_overrides(model={"lambda": 0.5 * lam},
                             time={"t_max": 4 * tm["t_max"], "steps": 4 * tm["steps"]})
    bath = half.bath()
    c = map_coefficients(bath, half.params, SectorBasis(bath.n_modes, half.config["truncation"]["max_excitations"]),
                         half.times, min_weight=half.config["truncation"]["min_weight"], threads=threads)
    rho0 = sc.initial_state
    pe_half = populations(c, (float(rho0[0, 0].real), float(rho0[1, 1].real)))[:, 0]
    return van_hove_collapse(sc.times, pe, lam, half.times, pe_half, 0.5 * lam)


def run_survival(sc: Scenario) -> RunResult:
    cfg = sc.config
    J, params = sc.density, sc.params
    t = sc.times
    s = solve_survival(J, params.Omega, t, params.lam, nodes_per_panel=cfg["survival"]["nodes_per_panel"])
    res = RunResult()
    res.tables["survival"] = Table(["t", "U_re", "U_im", "U_abs2", "flip_norm"],
                                   [t, s.U.real, s.U.imag, s.probability, s.flip_norm])
    analysis = {"norm_residual_max": float(np.max(s.norm_residual))}
    if J.family != "single":
        pole = bound_state(J, params.Omega, params.lam)
        analysis["pole"] = asdict(pole)
        top = upper_bound_state(J, params.Omega, params.lam)
        analysis["upper_pole"] = asdict(top)
        ident = cut_pole_identity(J, params.Omega, params.lam)
        analysis["cut_pole_identity"] = asdict(ident)
        analysis["golden_rule_rate"] = decay_rate(J, params.Omega, params.lam)
        # a pole with negligible weight (flat band from w = 0) leaves no plateau to fit
        visible_pole = pole.Z**2 + top.Z**2 > PLATEAU_MIN
        if cfg["survival"]["tail"] and (visible_pole or J.family == "ohmic"):
            rep = tail_fit(s, J, params.Omega, params.lam)
            analysis["tail"] = {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(rep).items()}
    res.records["analysis"] = analysis
    res.manifest = {"truncation_health": 1.0, "convergence_M_vs_M_plus_1": None}
    return res
