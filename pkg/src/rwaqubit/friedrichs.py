"""Zero-temperature reservoir: survival amplitude, bound state and tails.

With the reservoir in its vacuum and the qubit excited, only the one-
excitation sector is involved.  The survival amplitude obeys

    dU/dt = -int_0^t K(t - s) U(s) ds,   U(0) = 1,

with ``K(tau) = lam^2 int J(w) exp(-i (w - Omega) tau) dw``, and the
one-boson amplitudes are ``c(w, t) = -i lam g(w) int_0^t exp(i (w - Omega) s) U(s) ds``.

Frequencies below carry the detuning ``wbar = w - Omega``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .bath import EXP_CUTOFF_SPAN, DiscretizedBath, SpectralDensity, memory_kernel

# largest allowed dt * max|wbar|
RESOLUTION_LIMIT = 0.5
GAUSS_PER_CELL = 8
NODES_PER_PANEL = 8
# exponential-cutoff densities are integrated to this many cutoffs for flip amplitudes
FLIP_SPAN = 40.0
PV_CHECK_TOL = 1e-8


class ResolutionError(ValueError):
    """Time step too coarse for the bath bandwidth."""


class BracketError(RuntimeError):
    """The bound-state equation could not be bracketed."""


# -- small-argument-safe exponential integrals ---------------------------------

def _phi1(z):
    """(e^z - 1)/z."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 1e-2
    zs = np.where(small, 1.0, z)
    out = np.expm1(zs) / zs
    ser = 1 + z / 2 + z**2 / 6 + z**3 / 24 + z**4 / 120
    return np.where(small, ser, out)


def _psi(z):
    """int_0^1 u e^{z u} du = (z e^z - e^z + 1)/z^2."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 1e-2
    zs = np.where(small, 1.0, z)
    out = (zs * np.exp(zs) - np.expm1(zs)) / zs**2
    ser = 0.5 + z / 3 + z**2 / 8 + z**3 / 30 + z**4 / 144
    return np.where(small, ser, out)


# -- spectral nodes -----------------------------------------------------------

def _support_window(J: SpectralDensity, span: float = FLIP_SPAN):
    lo, hi = J.support()
    if math.isinf(hi):
        hi = span * J.cutoff
    return lo, hi


def spectral_nodes(J: SpectralDensity | DiscretizedBath, t_max: float,
                   nodes_per_panel: int = NODES_PER_PANEL, span: float = FLIP_SPAN):
    """Frequencies and weights with ``sum W f(w) ~ int J f dw`` for f varying on 1/t_max.

    Continuum densities get composite Gauss-Legendre panels about
    ``2 pi / t_max`` wide; discrete baths return their modes with ``g**2``.
    """
    if isinstance(J, DiscretizedBath):
        return J.omega.copy(), J.g**2
    if J.family == "single":
        return np.array([J.omega0]), np.array([J.g**2])
    lo, hi = _support_window(J, span)
    width = 2 * math.pi / max(t_max, 1e-12)
    panels = max(4, int(math.ceil((hi - lo) / width)))
    x, w = np.polynomial.legendre.leggauss(nodes_per_panel)
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights * J(nodes)


def _max_detuning(J, Omega):
    if isinstance(J, DiscretizedBath):
        return float(np.max(np.abs(J.omega - Omega)))
    if J.family == "single":
        return abs(J.omega0 - Omega)
    lo, hi = J.window() if J.family == "ohmic" else J.support()
    return max(abs(lo - Omega), abs(hi - Omega))


# -- survival amplitude -------------------------------------------------------

@dataclass(frozen=True)
class SurvivalAmplitude:
    """U(t) on a uniform grid with the one-boson amplitude bookkeeping.

    ``flip_norm[n] = sum_q |c_q(t_n)|^2``; ``flip_final`` holds c on the
    frequency nodes ``flip_omega`` at the last time; ``flip_table`` holds the
    full c_k(t) history for discrete baths.
    """

    t: np.ndarray
    U: np.ndarray
    flip_norm: np.ndarray
    flip_omega: np.ndarray
    flip_final: np.ndarray
    flip_table: np.ndarray | None = None
    pole: "BoundStatePole | None" = None

    @property
    def probability(self) -> np.ndarray:
        return np.abs(self.U) ** 2

    @property
    def norm_residual(self) -> np.ndarray:
        return np.abs(self.probability + self.flip_norm - 1.0)


def _hat_moments_time(kernel, dt, n):
    """a_m, b_m = int_0^dt K(m dt - v) (1 - v/dt, v/dt) dv for m = 1..n by Gauss-Legendre in v."""
    x, w = np.polynomial.legendre.leggauss(GAUSS_PER_CELL)
    v = 0.5 * dt * (x + 1)
    wv = 0.5 * dt * w
    m = np.arange(1, n + 1)
    K = kernel(np.clip(m[:, None] * dt - v[None, :], 0.0, None))
    a = K @ (wv * (1 - v / dt))
    b = K @ (wv * (v / dt))
    return a, b


def _hat_moments_spectral(nodes, weights, Omega, dt, n, chunk=512):
    """Same moments from a spectral sum, exact per node."""
    wbar = nodes - Omega
    z = 1j * wbar * dt
    ha = weights * dt * (_phi1(z) - _psi(z))
    hb = weights * dt * _psi(z)
    a = np.empty(n, dtype=complex)
    b = np.empty(n, dtype=complex)
    for s in range(0, n, chunk):
        m = np.arange(s + 1, min(n, s + chunk) + 1)
        ph = np.exp(-1j * np.multiply.outer(m * dt, wbar))
        a[s:s + len(m)] = ph @ ha
        b[s:s + len(m)] = ph @ hb
    return a, b


def _has_closed_kernel(J):
    return isinstance(J, SpectralDensity) and (
        J.family in ("flat", "single") or (J.family == "ohmic" and J.cutoff_shape == "exponential"))


def solve_survival(J: SpectralDensity | DiscretizedBath, Omega: float, times, coupling: float = 1.0,
                   *, kernel_route: str = "auto", nodes_per_panel: int = NODES_PER_PANEL,
                   flip_span: float = FLIP_SPAN, keep_table: bool | None = None,
                   resolution_limit: float = RESOLUTION_LIMIT) -> SurvivalAmplitude:
    """Survival amplitude by second-order product integration of the memory equation.

    Kernel moments against piecewise-linear hat functions are computed
    exactly (from the closed-form kernel when one exists, otherwise from a
    spectral sum), and the outer derivative is advanced with the trapezoidal
    rule.  The grid must start at 0, be uniform and satisfy
    ``dt * max|w - Omega| <= RESOLUTION_LIMIT``.
    """
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or len(t) < 2 or t[0] != 0.0:
        raise ValueError("times must be a 1-D grid starting at 0")
    n = len(t) - 1
    dt = t[-1] / n
    if not np.allclose(np.diff(t), dt, rtol=1e-9, atol=0):
        raise ValueError("solve_survival needs a uniform grid")
    if dt * _max_detuning(J, Omega) > resolution_limit:
        raise ResolutionError(
            f"dt = {dt:g} too coarse: dt * max|w - Omega| = {dt * _max_detuning(J, Omega):.3g} "
            f"exceeds {resolution_limit}")
    lam2 = coupling**2
    nodes, weights = spectral_nodes(J, t[-1], nodes_per_panel, flip_span)
    weights = lam2 * weights

    if kernel_route not in ("auto", "spectral"):
        raise ValueError(f"unknown kernel route {kernel_route!r}")
    if kernel_route == "auto" and _has_closed_kernel(J):
        a, b = _hat_moments_time(lambda tau: lam2 * memory_kernel(J, Omega, tau), dt, n)
    else:
        a, b = _hat_moments_spectral(nodes, weights, Omega, dt, n)

    U = np.empty(n + 1, dtype=complex)
    U[0] = 1.0
    F_prev = 0.0
    denom = 1.0 + 0.5 * dt * b[0]
    ra = a[::-1]   # ra[-m] = a_m
    rb = b[::-1]
    for k in range(1, n + 1):
        # history part of F_k: sum_{m=1..k} a_m U_{k-m} + sum_{m=2..k} b_m U_{k-m+1}
        S = ra[n - k:] @ U[:k] + (rb[n - k:n - 1] @ U[1:k] if k > 1 else 0.0)
        U[k] = (U[k - 1] - 0.5 * dt * (F_prev + S)) / denom
        F_prev = S + b[0] * U[k]

    wbar = nodes - Omega
    z = 1j * wbar * dt
    p1, ps = _phi1(z) * dt, _psi(z) * dt
    step_phase = np.exp(1j * wbar * dt)
    phase = np.ones_like(wbar, dtype=complex)
    acc = np.zeros_like(wbar, dtype=complex)
    flip_norm = np.zeros(n + 1)
    discrete = isinstance(J, DiscretizedBath) or J.family == "single"
    if keep_table is None:
        keep_table = discrete and len(nodes) * (n + 1) <= 5_000_000
    table = np.zeros((n + 1, len(nodes)), dtype=complex) if keep_table else None
    for k in range(1, n + 1):
        acc += phase * (U[k - 1] * p1 + (U[k] - U[k - 1]) * ps)
        phase *= step_phase
        if k % 256 == 0:
            phase = np.exp(1j * wbar * t[k])   # keep accumulated phase error at round-off
        flip_norm[k] = float(weights @ (acc.real**2 + acc.imag**2))
        if table is not None:
            table[k] = acc
    amp = -1j * np.sqrt(weights)
    if table is not None:
        table *= amp
    return SurvivalAmplitude(t, U, flip_norm, nodes, amp * acc, table)


# -- principal values and the spectral representation -------------------------

def principal_value(J: SpectralDensity, omega: float, method: str = "auto") -> float:
    """P int J(w')/(omega - w') dw'."""
    if method not in ("auto", "pairing"):
        raise ValueError(f"unknown method {method!r}")
    if J.family == "single":
        return J.g**2 / (omega - J.omega0)
    if method == "auto":
        if J.family == "flat":
            lo, hi = J.band
            return J.scale * math.log(abs((omega - lo) / (omega - hi)))
        if J.cutoff_shape == "exponential" and J.exponent == 1.0:
            y = omega / J.cutoff
            if y == 0:
                return -J.scale
            if y > 50:
                # asymptotic series of y e^{-y} Ei(y) - 1; truncation error below 1e-15 here
                term, total = 1.0, 0.0
                for k in range(1, 21):
                    term *= k / y
                    total += term
                return J.scale * total
            return J.scale * (y * math.exp(-y) * special.expi(y) - 1.0)
        if J.cutoff_shape == "hard" and J.exponent == 1.0:
            wc = J.cutoff
            if omega == 0:
                return -J.scale
            return J.scale / wc * (-wc + omega * math.log(abs(omega / (omega - wc))))
    return pv_pairing(J, omega)


def _pv_core(J, omega, h, lo, hi):
    """-P int J(x)/(x - omega) dx with a symmetric window of half-width h."""
    def odd(u):
        return (J(omega + u) - J(omega - u)) / u
    pts_in = [p for p in _kinks(J) if 0 < abs(p - omega) < h]
    inner = integrate.quad(odd, 0.0, h, points=[abs(p - omega) for p in pts_in] or None,
                           limit=400, epsabs=1e-13, epsrel=1e-11)[0]
    out = 0.0
    f = lambda x: J(x) / (x - omega)
    if omega - h > lo:
        out += _quad_regular(f, lo, omega - h, J)
    if omega + h < hi:
        out += _quad_regular(f, omega + h, hi, J)
    return -(inner + out)


def _kinks(J):
    if J.family == "flat":
        return list(J.band)
    if J.family == "ohmic" and J.cutoff_shape == "hard":
        return [J.cutoff]
    return []


def _quad_regular(f, a, b, J, extra=()):
    pts = sorted(p for p in (*_kinks(J), *extra) if a < p < b)
    if math.isinf(b):
        split = max(a, 0.0) + 20 * J.cutoff
        return (integrate.quad(f, a, split, points=pts or None, limit=400, epsabs=1e-13, epsrel=1e-11)[0]
                + integrate.quad(f, split, math.inf, limit=400, epsabs=1e-13, epsrel=1e-11)[0])
    return integrate.quad(f, a, b, points=pts or None, limit=400, epsabs=1e-13, epsrel=1e-11)[0]


def pv_pairing(J: SpectralDensity, omega: float, check_tol: float = PV_CHECK_TOL) -> float:
    """Principal value by pairing omega +- u, confirmed with a second pairing width."""
    lo, hi = J.support()
    if not lo < omega < hi:
        return -_quad_regular(lambda x: J(x) / (x - omega), lo, hi, J)
    h = min(omega - lo, hi - omega, 1.0 if math.isinf(hi) else hi - lo)
    v1 = _pv_core(J, omega, h, lo, hi)
    v2 = _pv_core(J, omega, 0.5 * h, lo, hi)
    if abs(v1 - v2) > check_tol * (1 + abs(v1)):
        raise ArithmeticError(f"principal value at omega={omega:g} not converged: {v1!r} vs {v2!r}")
    return v1


def spectral_weight(J: SpectralDensity, Omega: float, omega, coupling: float = 1.0, method="auto"):
    """Continuum weight lam^2 J / (R^2 + pi^2 lam^4 J^2), R = w - Omega - lam^2 PV(w)."""
    lam2 = coupling**2
    w = np.atleast_1d(np.asarray(omega, dtype=float))
    Jw = lam2 * J(w)
    R = np.array([x - Omega - lam2 * principal_value(J, x, method) for x in w])
    out = Jw / (R**2 + (math.pi * Jw) ** 2)
    return out if np.ndim(omega) else float(out[0])


# -- bound state --------------------------------------------------------------

@dataclass(frozen=True)
class BoundStatePole:
    """Discrete level outside the continuum at energy ``E = Omega - s_I``.

    The lower pole has ``s_I > Omega`` when the continuum starts at 0 and
    solves ``s = int J/(s + w - Omega)``.  Near the pole the survival
    amplitude behaves as ``Z exp(i s_I t)``.
    """

    exists: bool
    s_I: float = math.nan
    Z: float = 0.0
    residual: float = math.nan
    inverse_moment: float = math.nan


def _edges(J):
    """Lower and upper threshold of the spectrum; a single mode counts from 0."""
    if J.family == "single":
        return 0.0, math.inf
    return J.support()


def _edge_sums(J, u, lam2, side, slope=True):
    """lam^2 int J/(E - w) and lam^2 int J/(E - w)^2 at distance u > 0 outside a threshold.

    ``side = -1`` puts E below the lower threshold, ``+1`` above the upper
    one.  Everything is written in u, so a pole exponentially close to an
    edge stays resolved.  ``slope=False`` skips the second integral.
    """
    lo, hi = _edges(J)
    if J.family == "single":
        d = u + J.omega0 - lo
        return -lam2 * J.g**2 / d, lam2 * J.g**2 / d**2
    if J.family == "flat":
        W = hi - lo
        a, b = (-u, -u - W) if side < 0 else (u + W, u)    # E - lo, E - hi
        return lam2 * J.scale * math.log(a / b), lam2 * J.scale * (1 / b - 1 / a)
    if side < 0:
        # ohmic: J vanishes at the lower edge
        extra = (lo + u, lo + 10 * u)
        s1 = -_quad_regular(lambda w: J(w) / (u + w - lo), lo, hi, J, extra)
        s2 = _quad_regular(lambda w: J(w) / (u + w - lo) ** 2, lo, hi, J, extra) if slope else math.nan
        return lam2 * s1, lam2 * s2
    # finite upper edge with J(hi) > 0: subtract the edge value and add its logarithm back
    W = hi - lo
    Jh = float(J(np.array([hi]))[0])
    extra = (hi - 10 * u, hi - u)
    L = math.log1p(W / u)
    s1 = _quad_regular(lambda w: (J(w) - Jh) / ((hi - w) + u), lo, hi, J, extra) + Jh * L
    if not slope:
        return lam2 * s1, math.nan
    # within a = W/1000 of the edge J is quadratic in x = hi - w and the
    # moments of 1, x, x^2 against (x + u)^-2 are closed form
    a = 1e-3 * W
    h = 0.1 * a
    j0, j1, j2, j3 = J(hi - h * np.arange(4.0))
    dJ = (3 * j0 - 4 * j1 + j2) / (2 * h)            # -dJ/dx at the edge
    d2J = (2 * j0 - 5 * j1 + 4 * j2 - j3) / h**2
    La = math.log1p(a / u)
    near = (Jh * (1 / u - 1 / (a + u)) - dJ * (La - a / (a + u))
            + 0.5 * d2J * (a - 2 * u * La + u * a / (a + u)))
    far = _quad_regular(lambda w: J(w) / ((hi - w) + u) ** 2, lo, hi - a, J)
    return lam2 * s1, lam2 * (near + far)


def _edge_pole(J, Omega, lam2, side, u_floor, u_cap, max_iter, I, guaranteed=False):
    """Root of P(E) = E - Omega - Sigma(E) at distance u from a threshold.

    P increases with E outside the band: below it P falls as u grows, above
    it P rises, so the bracket in log u is monotone.  When the self-energy
    diverges at the edge (``guaranteed``) a root closer than ``u_floor`` is
    reported at the edge with weight 0, its true weight being below u_floor/J.
    """
    lo, hi = _edges(J)
    edge = lo if side < 0 else hi

    def P(u):
        return edge + side * u - Omega - _edge_sums(J, u, lam2, side, slope=False)[0]

    inside = -side    # sign of P next to the edge when a pole exists
    if inside * P(u_floor) <= 0:
        if guaranteed:
            return BoundStatePole(True, Omega - edge, 0.0, math.nan, I)
        raise BracketError(f"pole closer than {u_floor:g} to the band edge")
    if u_cap is not None:
        u_hi = u_cap
        if inside * P(u_hi) > 0:
            raise BracketError(f"pole lies beyond the search cap u = {u_cap:g}")
    else:
        u_hi = max(1.0, abs(Omega - edge))
        while inside * P(u_hi) > 0:
            u_hi *= 2
            if u_hi > 1e12 * max(Omega, 1.0):
                raise BracketError("no sign change of the pole equation within 1e12 * Omega of the edge")
    a, b = math.log(u_floor), math.log(u_hi)
    for _ in range(max_iter):
        m = 0.5 * (a + b)
        if m == a or m == b:
            break
        if inside * P(math.exp(m)) > 0:
            a = m
        else:
            b = m
    ua, ub = math.exp(a), math.exp(b)
    u = ua if abs(P(ua)) <= abs(P(ub)) else ub
    Z = 1.0 / (1.0 + float(_edge_sums(J, u, lam2, side)[1]))
    return BoundStatePole(True, Omega - (edge + side * u), Z, abs(P(u)), I)


def bound_state(J: SpectralDensity, Omega: float, coupling: float = 1.0, s_hi: float | None = None,
                max_iter: int = 400) -> BoundStatePole:
    """Pole below the continuum by bisection in the distance to the lower threshold.

    For a continuum starting at 0 (and for a single mode) the pole exists
    iff ``lam^2 int J/w > Omega``.  A band starting at ``lo > 0`` uses
    ``int J/(w - lo)`` against ``Omega - lo``, which a flat band always
    satisfies.  ``s_hi`` caps the search at ``s_I <= s_hi``.
    """
    lam2 = coupling**2
    I = lam2 * J.inverse_moment()
    if J.is_zero:
        return BoundStatePole(False, inverse_moment=I)
    lo, _ = _edges(J)
    edge_moment = math.inf if (J.family == "flat" and lo > 0) else I
    if edge_moment <= Omega - lo:
        return BoundStatePole(False, inverse_moment=I)
    u_floor = 1e-300 if math.isinf(edge_moment) else 1e-100
    u_cap = None
    if s_hi is not None:
        u_cap = s_hi - Omega + lo
        if u_cap <= u_floor:
            raise BracketError(f"s_hi = {s_hi:g} does not reach below the continuum")
    return _edge_pole(J, Omega, lam2, -1, u_floor, u_cap, max_iter, I, math.isinf(edge_moment))


def upper_bound_state(J: SpectralDensity, Omega: float, coupling: float = 1.0,
                      max_iter: int = 400) -> BoundStatePole:
    """Pole above a continuum with a finite top edge (flat band, hard cutoff).

    Where J stays finite at the top edge the self-energy diverges
    logarithmically there, so this pole always exists, though its weight is
    exponentially small at weak coupling.
    """
    lam2 = coupling**2
    I = lam2 * J.inverse_moment()
    if J.is_zero or J.family == "single":
        return BoundStatePole(False, inverse_moment=I)
    _, hi = _edges(J)
    if not math.isfinite(hi):
        return BoundStatePole(False, inverse_moment=I)
    # the quadrature route squares u, so it stops where that would underflow
    u_floor = 1e-300 if J.family == "flat" else 1e-150
    return _edge_pole(J, Omega, lam2, +1, u_floor, None, max_iter, I, guaranteed=True)


# -- identity and tails -------------------------------------------------------

@dataclass(frozen=True)
class CutPoleIdentity:
    cut: float
    pole_weight: float
    residual: float
    upper_pole_weight: float = 0.0


def cut_pole_identity(J: SpectralDensity, Omega: float, coupling: float = 1.0,
                      method: str = "auto") -> CutPoleIdentity:
    """Continuum weight plus pole weight, which must add to one."""
    if J.family == "single":
        raise ValueError("a single mode has no continuum; the identity needs a continuous density")
    if J.is_zero:
        raise ValueError("J = 0: no continuum weight and no pole")
    lam2 = coupling**2
    lo, hi = J.support()
    # the continuum weight peaks near the renormalized gap; split there
    peak = min(max(Omega, lo), hi if math.isfinite(hi) else Omega)
    width = max(math.pi * lam2 * float(J(np.array([peak]))[0]), 1e-6 * Omega)
    pts = sorted({p for p in (peak - 20 * width, peak, peak + 20 * width, *_kinks(J)) if lo < p < hi})
    f = lambda w: spectral_weight(J, Omega, w, coupling, method)
    edges = [lo, *pts] + ([hi] if math.isfinite(hi) else [])
    cut = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        cut += integrate.quad(f, a, b, limit=500, epsabs=1e-13, epsrel=1e-11)[0]
    if not math.isfinite(hi):
        cut += integrate.quad(f, edges[-1], math.inf, limit=500, epsabs=1e-13, epsrel=1e-11)[0]
    pole = bound_state(J, Omega, coupling)
    Z = pole.Z if pole.exists else 0.0
    top = upper_bound_state(J, Omega, coupling)
    Zu = top.Z if top.exists else 0.0
    return CutPoleIdentity(cut, Z, abs(cut + Z + Zu - 1.0), Zu)


@dataclass(frozen=True)
class TailReport:
    exponent: float
    expected_exponent: float
    prefactor: float
    expected_prefactor: float
    window: tuple
    plateau: float = math.nan
    plateau_expected: float = math.nan


def tail_fit(s: SurvivalAmplitude, J: SpectralDensity, Omega: float, coupling: float = 1.0,
             window: tuple | None = None, noise_floor: float | None = None) -> TailReport:
    """Power-law fit of |U| on the late window (default: the second half of the run).

    With bound states the report carries the time-averaged tail |U|^2 and
    its expected value, the sum of the squared pole weights.
    """
    t, U = s.t, s.U
    lo, hi = window if window is not None else (0.5 * t[-1], t[-1])
    sel = (t >= lo) & (t <= hi) & (t > 0)
    if sel.sum() < 8:
        raise ValueError("tail window holds fewer than 8 points")
    pole = bound_state(J, Omega, coupling)
    top = upper_bound_state(J, Omega, coupling)
    if pole.exists or top.exists:
        # two poles beat against each other; their time average is Z^2 + Z_u^2
        weights = [q.Z for q in (pole, top) if q.exists]
        p = np.abs(U[sel]) ** 2
        return TailReport(math.nan, math.nan, math.nan, math.nan, (lo, hi),
                          float(np.mean(p)), float(sum(z**2 for z in weights)))
    a = J.exponent
    amp = np.abs(U[sel])
    if noise_floor is None:
        # second-order scheme: the fine-grid error is about a third of the fine/coarse gap
        coarse = solve_survival(J, Omega, t[::2], coupling, keep_table=False,
                                resolution_limit=2 * RESOLUTION_LIMIT)
        both = sel[::2]
        floor = float(np.max(np.abs(U[::2][both] - coarse.U[both]))) / 3
    else:
        floor = noise_floor
    if np.median(amp) < 10 * floor:
        raise ArithmeticError(f"tail |U| ~ {np.median(amp):.2g} is within 10x of the solver noise floor {floor:.2g}")
    slope, icpt = np.polyfit(np.log(t[sel]), np.log(amp), 1)
    lam2 = coupling**2
    c = lam2 * J.low_frequency_coefficient()
    expected = c * special.gamma(1 + a) / (Omega - lam2 * J.inverse_moment()) ** 2
    pref = float(np.median(amp * t[sel] ** (1 + a)))
    return TailReport(float(slope), -(1 + a), pref, float(expected), (lo, hi))


def decay_rate(J: SpectralDensity, Omega: float, coupling: float = 1.0) -> float:
    """Golden-rule probability decay rate 2 pi lam^2 J(Omega)."""
    return 2 * math.pi * coupling**2 * float(J(np.array([Omega]))[0])
