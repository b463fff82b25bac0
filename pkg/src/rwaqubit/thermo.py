"""Equilibration diagnostics for thermal runs.

Everything here post-processes finished runs: Gibbs populations, detailed
balance, the closed-form determinant decay, the c-number ratio limits,
weak-coupling time rescaling and the reservoir's return to its initial
occupations.  "Tail" always means the last quartile of the valid window and
tail figures are medians.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .bath import ModelParams, thermal_occupation
from .exact import MapCoefficients
from .gkls import GklsCoefficients

TAIL_FRACTION = 0.25


def asymptotic_populations(params: ModelParams) -> tuple[float, float]:
    """Gibbs populations (p_excited, p_ground) at the qubit gap."""
    if params.is_vacuum:
        raise ValueError("zero-temperature reservoir: use the survival-amplitude analysis instead")
    x = params.beta * params.Omega
    pe = 1.0 / (1.0 + math.exp(x)) if x < 700 else 0.0
    return pe, 1.0 - pe


def cbar_and_D(t, gamma_plus, n: float) -> tuple[np.ndarray, np.ndarray]:
    """1/cbar(t) and the predicted determinant from the cumulative integral of Gamma_+.

    ``1/cbar = (1 - exp(-k I)) / (2n + 1)`` and ``D = exp(-k I)`` with
    ``k = (2n + 1)/n`` and ``I = int_0^t Gamma_+``.
    """
    gp = np.asarray(gamma_plus, dtype=float)
    if not n > 0:
        raise ValueError("n must be > 0")
    if not np.all(np.isfinite(gp)):
        bad = int(np.flatnonzero(~np.isfinite(gp))[0])
        raise ValueError(f"Gamma_+ has a masked gap at grid index {bad}")
    integral = cumulative_trapezoid(gp, np.asarray(t, dtype=float), initial=0.0)
    D = np.exp(-(2 * n + 1) / n * integral)
    return (1.0 - D) / (2 * n + 1), D


def tail_slice(n_valid: int, fraction: float = TAIL_FRACTION) -> slice:
    if n_valid < 4:
        raise ValueError("tail too short: fewer than 4 valid points")
    return slice(int(math.floor((1 - fraction) * n_valid)), n_valid)


@dataclass(frozen=True)
class RatioTails:
    lower: np.ndarray          # (1 - alpha)/alpha over the tail
    upper: np.ndarray          # (1 - xi)/xi over the tail
    lower_limit: float
    upper_limit: float

    @property
    def lower_median(self) -> float:
        return float(np.median(self.lower))

    @property
    def upper_median(self) -> float:
        return float(np.median(self.upper))


def cnumber_ratios(c: MapCoefficients, params: ModelParams, valid=None) -> RatioTails:
    """(1-alpha)/alpha and (1-xi)/xi on the tail, with limits n/(n+1) and (n+1)/n.

    ``valid`` optionally masks grid points (e.g. the rate validity mask); the
    tail is the last quartile of the kept points.
    """
    n = float(thermal_occupation(params.Omega, params.beta))
    if n == 0:
        raise ValueError("ratio limits need a finite temperature")
    idx = np.arange(len(c.t)) if valid is None else np.flatnonzero(valid)
    tail = idx[tail_slice(idx.size)]
    return RatioTails((1 - c.alpha[tail]) / c.alpha[tail], (1 - c.xi[tail]) / c.xi[tail],
                      n / (n + 1), (n + 1) / n)


def van_hove_collapse(t_a, p_a, lam_a: float, t_b, p_b, lam_b: float) -> float:
    """Sup difference of two population series on the common lambda^2 t axis.

    Each run's time axis is multiplied by its own lambda^2; run b is then
    linearly interpolated onto run a's rescaled points.  Returns the error as
    a fraction of run a's population range (0 when both are flat).
    """
    sa = np.asarray(t_a, dtype=float) * lam_a**2
    sb = np.asarray(t_b, dtype=float) * lam_b**2
    p_a, p_b = np.asarray(p_a, dtype=float), np.asarray(p_b, dtype=float)
    if lam_a == 0 or lam_b == 0:
        # no coupling: no dynamics to rescale, compare on the raw axis
        sa, sb = np.asarray(t_a, dtype=float), np.asarray(t_b, dtype=float)
    hi = min(sa[-1], sb[-1])
    keep = sa <= hi * (1 + 1e-12)
    if keep.sum() < 2:
        raise ValueError("rescaled grids do not overlap")
    diff = np.abs(p_a[keep] - np.interp(sa[keep], sb, p_b))
    span = np.ptp(np.concatenate([p_a[keep], p_b[sb <= hi * (1 + 1e-12)]]))
    if span == 0:
        return float(diff.max())
    return float(diff.max() / span)


@dataclass(frozen=True)
class ReservoirReturn:
    deviation: np.ndarray      # max over modes of |n_k(t) - n_k(0)|
    peak: float
    peak_time: float
    return_time: float         # first time after the peak below threshold * peak (nan if never)
    D_at_return: float


def reservoir_return(t, occupations, D, threshold: float = 0.1) -> ReservoirReturn:
    """When the mode occupations come back within ``threshold`` of their peak deviation."""
    t = np.asarray(t, dtype=float)
    occ = np.asarray(occupations, dtype=float)
    dev = np.max(np.abs(occ - occ[0]), axis=1)
    ip = int(np.argmax(dev))
    peak = float(dev[ip])
    after = np.flatnonzero(dev[ip:] < threshold * peak) + ip if peak > 0 else np.array([], int)
    if after.size:
        i = int(after[0])
        return ReservoirReturn(dev, peak, float(t[ip]), float(t[i]), float(np.asarray(D)[i]))
    return ReservoirReturn(dev, peak, float(t[ip]), math.nan, math.nan)


@dataclass
class EquilibriumReport:
    n: float
    p_excited_asymptotic: float
    p_ground_asymptotic: float
    p_excited_tail: float = math.nan
    balance_ratio_tail: float = math.nan
    balance_target: float = math.nan
    ratio_lower_tail: float = math.nan
    ratio_lower_limit: float = math.nan
    ratio_upper_tail: float = math.nan
    ratio_upper_limit: float = math.nan
    D_max_increase: float = math.nan
    D_closed_form_error: float = math.nan
    collapse_error: float = math.nan
    reservoir_return_time: float = math.nan
    reservoir_D_at_return: float = math.nan
    extras: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        out = {k: v for k, v in self.__dict__.items() if k != "extras"}
        out.update(self.extras)
        return out


def equilibrium_report(c: MapCoefficients, g: GklsCoefficients, params: ModelParams,
                       p_excited) -> EquilibriumReport:
    """Thermalization figures for one run.

    ``p_excited`` is the excited population series of the run's initial
    state.  Tail figures use the last quartile of the grid points where the
    rates are valid; the determinant checks use the leading stretch where
    the rates are valid and ``D > 0``, since the closed form integrates
    Gamma_+ from t = 0.
    """
    pe, pg = asymptotic_populations(params)
    n = float(thermal_occupation(params.Omega, params.beta))
    rep = EquilibriumReport(n, pe, pg)
    idx = np.flatnonzero(g.valid)
    if idx.size < 4:
        return rep
    tail = idx[tail_slice(idx.size)]
    rep.p_excited_tail = float(np.median(np.asarray(p_excited)[tail]))
    gp, gm = g.gamma_plus[tail], g.gamma_minus[tail]
    nz = gp != 0
    rep.balance_ratio_tail = float(np.median(gm[nz] / gp[nz])) if np.any(nz) else math.nan
    rep.balance_target = math.exp(params.beta * params.Omega)
    rep.ratio_lower_tail = float(np.median((1 - c.alpha[tail]) / c.alpha[tail]))
    rep.ratio_upper_tail = float(np.median((1 - c.xi[tail]) / c.xi[tail]))
    rep.ratio_lower_limit, rep.ratio_upper_limit = n / (n + 1), (n + 1) / n
    nv = g.leading_window(0.0)
    rep.extras["leading_window_end"] = float(c.t[nv - 1]) if nv else math.nan
    if nv >= 2:
        D = c.D[:nv]
        rep.D_max_increase = float(np.max(np.diff(D)))
        _, Dp = cbar_and_D(c.t[:nv], g.gamma_plus[:nv], n)
        rep.D_closed_form_error = float(np.max(np.abs(Dp - D) / np.abs(D)))
    return rep
