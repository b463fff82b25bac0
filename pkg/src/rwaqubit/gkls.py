"""Time-local GKLS generator recovered from the exact map, and its integration.

The generator is

    d rho/dt = -i G [s_z, rho]
               + Gamma_+ (s+ rho s- - {s- s+, rho}/2)
               + Gamma_- (s- rho s+ - {s+ s-, rho}/2)
               + Gamma_z (s_z rho s_z - rho)

with every coefficient obtained from alpha, xi, eta and their time
derivatives.  Inversion needs ``D = alpha + xi - 1 != 0`` and ``eta != 0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from .dynmap import SIGMA_MINUS, SIGMA_PLUS, qubit_state
from .exact import MapCoefficients

D_MIN = 1e-6
SELF_TEST_TOL = 0.01
# points with |D| below this are left out of the derivative self-test
SELF_TEST_D_FLOOR = 1e-2
RATE_FLOOR = 1e-10         # rates below this are round-off, e.g. at lambda = 0

SIGMA_Z = np.diag([1.0, -1.0]).astype(complex)


class GridTooCoarse(ValueError):
    """Halving the grid spacing changes extracted rates by more than the tolerance."""


class SolverFailure(RuntimeError):
    pass


def derivative(f, h):
    """Fourth-order finite difference on a uniform grid (one-sided near the ends)."""
    f = np.asarray(f)
    n = len(f)
    if n < 5:
        raise ValueError("need at least 5 grid points for fourth-order differences")
    d = np.empty_like(f)
    d[2:-2] = (f[:-4] - 8 * f[1:-3] + 8 * f[3:-1] - f[4:]) / (12 * h)
    d[0] = (-25 * f[0] + 48 * f[1] - 36 * f[2] + 16 * f[3] - 3 * f[4]) / (12 * h)
    d[1] = (-3 * f[0] - 10 * f[1] + 18 * f[2] - 6 * f[3] + f[4]) / (12 * h)
    d[-1] = (25 * f[-1] - 48 * f[-2] + 36 * f[-3] - 16 * f[-4] + 3 * f[-5]) / (12 * h)
    d[-2] = (3 * f[-1] + 10 * f[-2] - 18 * f[-3] + 6 * f[-4] - f[-5]) / (12 * h)
    return d


@dataclass(frozen=True)
class GklsCoefficients:
    """Rates on the grid plus the smooth pieces they are assembled from.

    ``parts`` holds the numerators, ``D``, ``eta`` and its derivative at the
    grid points.  Between grid points the integrator interpolates these
    smooth series and divides afterwards, which stays accurate where the
    rates themselves grow like ``1/D``.
    """

    t: np.ndarray
    gamma_plus: np.ndarray
    gamma_minus: np.ndarray
    F: np.ndarray
    valid: np.ndarray
    D: np.ndarray
    self_test: float = 0.0
    parts: dict | None = None

    @property
    def gamma_z(self) -> np.ndarray:
        return self.F.real

    @property
    def G(self) -> np.ndarray:
        return -self.F.imag

    def leading_window(self, d_floor: float = 0.0) -> int:
        """Number of leading grid points that are valid and have D > d_floor."""
        ok = self.valid & (self.D > d_floor)
        bad = np.flatnonzero(~ok)
        return int(bad[0]) if bad.size else len(self.t)

    def generator(self, i: int) -> np.ndarray:
        """Superoperator at grid point i acting on row-major vec(rho), shape (4, 4)."""
        return liouvillian(self.gamma_plus[i], self.gamma_minus[i], self.gamma_z[i], self.G[i])


def _assemble(num_plus, num_minus, dsum, D, eta, deta):
    gp = num_plus / D
    gm = num_minus / D
    F = -deta / (2 * eta) + dsum / (4 * D)
    return gp, gm, F


def _raw_rates(c: MapCoefficients, h: float, d_min: float):
    a, x, eta = c.alpha, c.xi, c.eta
    da, dx, deta = derivative(a, h), derivative(x, h), derivative(eta, h)
    D = a + x - 1
    valid = (np.abs(D) >= d_min) & (np.abs(eta) >= d_min) & np.isfinite(deta)
    parts = {
        "num_plus": -(da * x + (1 - a) * dx),
        "num_minus": -(a * dx + (1 - x) * da),
        "dsum": dx + da,
        "D": D,
        "eta": np.asarray(eta, dtype=complex),
        "deta": deta,
    }
    safe = dict(parts, D=np.where(valid, D, 1.0), eta=np.where(valid, eta, 1.0))
    gp, gm, F = _assemble(**safe)
    nan = np.nan
    return (np.where(valid, gp, nan), np.where(valid, gm, nan), np.where(valid, F, nan + 0j),
            valid, D, parts)


def _uniform_step(t):
    t = np.asarray(t, dtype=float)
    if len(t) < 5:
        raise ValueError("need at least 5 grid points")
    h = (t[-1] - t[0]) / (len(t) - 1)
    if not np.allclose(np.diff(t), h, rtol=1e-9, atol=1e-12 * max(1.0, abs(t[-1]))):
        raise ValueError("rates_from_map needs a uniform time grid")
    return h


def rates_from_map(c: MapCoefficients, d_min: float = D_MIN, self_test: bool = True,
                   self_test_tol: float = SELF_TEST_TOL) -> GklsCoefficients:
    """Gamma_+, Gamma_-, Gamma_z and G from the map coefficients.

    Points with ``|D| < d_min`` or ``|eta| < d_min`` are masked invalid (rates
    set to NaN).  The self-test re-extracts the rates on every other grid
    point and compares where ``|D| > 1e-2``; the sup difference relative to
    the sup rate is stored and, with ``self_test=True``, raises
    :class:`GridTooCoarse` above ``self_test_tol``.
    """
    h = _uniform_step(c.t)
    gp, gm, F, valid, D, parts = _raw_rates(c, h, d_min)
    err = 0.0
    if len(c.t) >= 10:
        half = MapCoefficients(c.t[::2], c.alpha[::2], c.xi[::2], c.gamma[::2], c.zeta[::2], c.eta[::2])
        gp2, gm2, F2, valid2, D2, _ = _raw_rates(half, 2 * h, d_min)
        sel = valid[::2] & valid2 & (np.abs(D2) > SELF_TEST_D_FLOOR)
        # a point next to a masked one sees the singularity in its stencil
        sel &= _stencil_clear(valid2 & (np.abs(D2) > SELF_TEST_D_FLOOR))
        if np.any(sel):
            # one common scale: a coefficient that vanishes identically must not amplify round-off
            pairs = ((gp[::2], gp2), (gm[::2], gm2), (F[::2], F2))
            scale = max(RATE_FLOOR, *(np.max(np.abs(fine[sel])) for fine, _ in pairs))
            err = max(float(np.max(np.abs(fine[sel] - coarse[sel]))) for fine, coarse in pairs) / scale
        if self_test and err > self_test_tol:
            raise GridTooCoarse(f"rates change by {err:.2%} between spacing {h:g} and {2 * h:g}; "
                                f"refine the time grid")
    return GklsCoefficients(np.asarray(c.t, dtype=float), gp, gm, F, valid, D, err, parts)


def _stencil_clear(ok):
    out = ok.copy()
    for s in (1, 2):
        out[s:] &= ok[:-s]
        out[:-s] &= ok[s:]
    return out


def liouvillian(gamma_plus, gamma_minus, gamma_z, G) -> np.ndarray:
    """GKLS superoperator on row-major vec(rho)."""
    I = np.eye(2)

    def left(A):
        return np.kron(A, I)

    def right(A):
        return np.kron(I, A.T)

    def dissipator(L):
        LdL = L.conj().T @ L
        return np.kron(L, L.conj()) - 0.5 * (left(LdL) + right(LdL))

    return (-1j * G * (left(SIGMA_Z) - right(SIGMA_Z))
            + gamma_plus * dissipator(SIGMA_PLUS)
            + gamma_minus * dissipator(SIGMA_MINUS)
            + gamma_z * dissipator(SIGMA_Z))


def _to_state(y):
    p, re, im = y
    return np.array([[p, re + 1j * im], [re - 1j * im, 1 - p]])


def integrate_gkls(g: GklsCoefficients, rho0, grid=None, *, rtol: float = 1e-10,
                   atol: float = 1e-12) -> np.ndarray:
    """Integrate the master equation from ``g.t[0]``, shape (len(grid), 2, 2).

    The state is carried as (rho_ee, Re rho_eg, Im rho_eg), so Hermiticity
    and unit trace hold by construction.  Rates between grid points come
    from cubic splines over the leading valid window; ``grid`` defaults to
    that window and must stay inside it.
    """
    rho0 = qubit_state(rho0)
    n = g.leading_window()
    if n < 4:
        raise SolverFailure("fewer than 4 valid leading grid points; nothing to integrate")
    t = g.t[:n]
    grid = t if grid is None else np.asarray(grid, dtype=float)
    if grid[0] < t[0] or grid[-1] > t[-1] + 1e-12 * max(1.0, abs(t[-1])):
        raise ValueError(f"grid leaves the valid window [{t[0]:g}, {t[-1]:g}]")
    if np.all(g.gamma_plus[:n] == 0) and np.all(g.gamma_minus[:n] == 0) and np.all(g.F[:n] == 0):
        return np.repeat(rho0[None], len(grid), axis=0)
    # fit only a few points past the requested end so a later D = 0 crossing cannot leak in
    m = min(n, int(np.searchsorted(t, grid[-1], side="right")) + 3)
    t = t[:m]
    if g.parts is not None:
        sp = {k: CubicSpline(t, v[:m]) for k, v in g.parts.items()}

        def rates(tt):
            gp, gm, F = _assemble(**{k: s(tt) for k, s in sp.items()})
            return gp, gm, F.real, -F.imag
    else:
        splines = [CubicSpline(t, v[:m]) for v in (g.gamma_plus, g.gamma_minus, g.gamma_z, g.G)]

        def rates(tt):
            return tuple(s(tt) for s in splines)

    def rhs(tt, y):
        gp, gm, gz, G = rates(tt)
        p, re, im = y
        coh = re + 1j * im
        dp = -gm * p + gp * (1 - p)
        dcoh = -(2j * G + 2 * gz + 0.5 * (gp + gm)) * coh
        return [dp, dcoh.real, dcoh.imag]

    y0 = [rho0[0, 0].real, rho0[0, 1].real, rho0[0, 1].imag]
    sol = solve_ivp(rhs, (t[0], grid[-1]), y0, method="DOP853", t_eval=grid, rtol=rtol, atol=atol)
    if not sol.success:
        raise SolverFailure(f"GKLS integration failed: {sol.message}")
    return np.stack([_to_state(y) for y in sol.y.T])


@dataclass(frozen=True)
class StationarityReport:
    fixed_point: float
    drift: float
    tail_start: float
    n_points: int


def stationarity_report(g: GklsCoefficients, tail_fraction: float = 0.25) -> StationarityReport:
    """Instantaneous fixed point Gamma_+/(Gamma_+ + Gamma_-) over the tail of the valid points."""
    idx = np.flatnonzero(g.valid)
    if idx.size == 0:
        raise ValueError("no valid rate points")
    tail = idx[int(np.floor((1 - tail_fraction) * idx.size)):]
    tot = g.gamma_plus[tail] + g.gamma_minus[tail]
    keep = tot != 0
    if not np.any(keep):
        raise ValueError("empty tail window: rates vanish on the tail")
    fp = g.gamma_plus[tail][keep] / tot[keep]
    half = len(fp) // 2
    drift = abs(np.median(fp[half:]) - np.median(fp[:half])) if half else 0.0
    return StationarityReport(float(np.median(fp)), float(drift), float(g.t[tail[0]]), int(keep.sum()))
