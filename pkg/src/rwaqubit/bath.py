"""Spectral densities, finite-mode discretization and bath correlation kernels.

Units: hbar = 1, so frequencies and energies share a unit.  Inverse
temperature ``beta = VACUUM`` (``math.inf``) selects the zero-temperature
reservoir everywhere in the package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

VACUUM = math.inf

FAMILIES = ("ohmic", "flat", "single")
CUTOFF_SHAPES = ("exponential", "hard")
SCHEMES = ("midpoint", "gauss-legendre")

# upper edge of the discretization window for an exponential cutoff, in units of omega_c
EXP_CUTOFF_SPAN = 10.0


@dataclass(frozen=True)
class ModelParams:
    """Qubit gap ``Omega``, inverse temperature ``beta`` and coupling scale ``lam``."""

    Omega: float
    beta: float = VACUUM
    lam: float = 1.0

    def __post_init__(self):
        if not (self.Omega > 0 and math.isfinite(self.Omega)):
            raise ValueError(f"Omega must be positive and finite, got {self.Omega}")
        if not self.beta > 0:
            raise ValueError(f"beta must be positive (or VACUUM), got {self.beta}")
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise ValueError(f"lam must be non-negative, got {self.lam}")

    @property
    def is_vacuum(self) -> bool:
        return math.isinf(self.beta)


@dataclass(frozen=True)
class SpectralDensity:
    """Continuum coupling density J(omega), zero for omega < 0.

    Use the constructors :meth:`ohmic`, :meth:`flat` and :meth:`single`
    rather than filling the fields by hand.

    * ohmic: ``J = scale * (w/wc)**a * f(w/wc)`` with ``f = exp(-x)`` or the
      hard step ``x <= 1``.
    * flat: ``J = scale`` on ``[lo, hi]``.
    * single: one mode ``(omega0, g)``, ``J = g**2 delta(w - omega0)``.
    """

    family: str
    scale: float = 0.0
    exponent: float = 1.0
    cutoff: float = 1.0
    cutoff_shape: str = "exponential"
    band: tuple = (0.0, 1.0)
    omega0: float = 1.0
    g: float = 0.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown spectral family {self.family!r}; expected one of {FAMILIES}")
        if self.family == "ohmic":
            if not self.exponent > 0:
                raise ValueError(f"ohmic exponent must be > 0, got {self.exponent}")
            if self.cutoff_shape not in CUTOFF_SHAPES:
                raise ValueError(f"unknown cutoff shape {self.cutoff_shape!r}")
            if not self.cutoff > 0:
                raise ValueError(f"cutoff must be > 0, got {self.cutoff}")
            if self.scale < 0:
                raise ValueError("scale must be >= 0")
        elif self.family == "flat":
            lo, hi = self.band
            if not (0 <= lo < hi and math.isfinite(hi)):
                raise ValueError(f"flat band needs 0 <= lo < hi < inf, got {self.band}")
            if self.scale < 0:
                raise ValueError("scale must be >= 0")
        else:
            if not self.omega0 > 0:
                raise ValueError(f"single-mode frequency must be > 0, got {self.omega0}")
            if self.g < 0:
                raise ValueError("single-mode coupling must be >= 0")

    @classmethod
    def ohmic(cls, scale, exponent=1.0, cutoff=1.0, cutoff_shape="exponential"):
        return cls("ohmic", scale=float(scale), exponent=float(exponent),
                   cutoff=float(cutoff), cutoff_shape=cutoff_shape)

    @classmethod
    def flat(cls, level, lo, hi):
        return cls("flat", scale=float(level), band=(float(lo), float(hi)))

    @classmethod
    def single(cls, omega0, g):
        return cls("single", omega0=float(omega0), g=float(g))

    @property
    def is_discrete(self) -> bool:
        return self.family == "single"

    @property
    def is_zero(self) -> bool:
        if self.family == "single":
            return self.g == 0
        return self.scale == 0

    def support(self) -> tuple[float, float]:
        """Closed interval outside which J vanishes (upper edge may be inf)."""
        if self.family == "flat":
            return self.band
        if self.family == "single":
            return (self.omega0, self.omega0)
        if self.cutoff_shape == "hard":
            return (0.0, self.cutoff)
        return (0.0, math.inf)

    def window(self) -> tuple[float, float]:
        """Default finite discretization window."""
        lo, hi = self.support()
        if math.isinf(hi):
            hi = EXP_CUTOFF_SPAN * self.cutoff
        return lo, hi

    def __call__(self, omega):
        w = np.asarray(omega, dtype=float)
        if self.family == "single":
            raise TypeError("single-mode density is a delta function; use its (omega0, g)")
        if self.family == "flat":
            lo, hi = self.band
            return np.where((w >= lo) & (w <= hi), self.scale, 0.0)
        x = np.clip(w, 0.0, None) / self.cutoff
        val = self.scale * x**self.exponent
        if self.cutoff_shape == "exponential":
            val = val * np.exp(-x)
        else:
            val = np.where(x <= 1.0, val, 0.0)
        return np.where(w > 0, val, 0.0)

    def low_frequency_coefficient(self) -> float:
        """c in J(w) ~ c w**a as w -> 0 (ohmic family only)."""
        if self.family != "ohmic":
            raise ValueError("low-frequency power law defined for the ohmic family only")
        return self.scale / self.cutoff**self.exponent

    def total_weight(self) -> float:
        """Integral of J over all frequencies (sum of g_k**2)."""
        if self.family == "single":
            return self.g**2
        if self.family == "flat":
            return self.scale * (self.band[1] - self.band[0])
        a = self.exponent
        if self.cutoff_shape == "exponential":
            return self.scale * self.cutoff * special.gamma(a + 1)
        return self.scale * self.cutoff / (a + 1)

    def inverse_moment(self) -> float:
        """Integral of J(w)/w; inf when J(0) > 0."""
        if self.family == "single":
            return self.g**2 / self.omega0
        if self.family == "flat":
            lo, hi = self.band
            if self.scale == 0:
                return 0.0
            return math.inf if lo == 0 else self.scale * math.log(hi / lo)
        a = self.exponent
        if self.cutoff_shape == "exponential":
            return self.scale * special.gamma(a)
        return self.scale / a


@dataclass(frozen=True)
class DiscretizedBath:
    """Finite set of modes ``omega[k]`` with real couplings ``g[k] >= 0``."""

    omega: np.ndarray
    g: np.ndarray
    source: SpectralDensity | None = field(default=None, compare=False)

    def __post_init__(self):
        omega = np.atleast_1d(np.asarray(self.omega, dtype=float))
        g = np.atleast_1d(np.asarray(self.g, dtype=float))
        if omega.shape != g.shape or omega.ndim != 1:
            raise ValueError("omega and g must be 1-D arrays of equal length")
        if omega.size == 0:
            raise ValueError("a bath needs at least one mode")
        if np.any(omega <= 0):
            raise ValueError("mode frequencies must be > 0")
        if np.any(g < 0) or not np.all(np.isfinite(g)):
            raise ValueError("couplings must be real, finite and >= 0")
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "g", g)

    @property
    def n_modes(self) -> int:
        return self.omega.size

    def kernel(self, Omega, tau):
        """sum_k g_k^2 exp(-i (w_k - Omega) tau)."""
        tau = np.asarray(tau, dtype=float)
        phase = np.exp(-1j * np.multiply.outer(tau, self.omega - Omega))
        return phase @ (self.g**2)


def discretize(J: SpectralDensity, n_modes: int, scheme: str = "midpoint",
               window: tuple | None = None) -> DiscretizedBath:
    """Replace J by ``n_modes`` modes with ``g_k**2 = weight_k * J(omega_k)``.

    The default window is the support of J, truncated at
    ``EXP_CUTOFF_SPAN * cutoff`` for an exponential cutoff.  A single-mode
    density returns its one mode for any ``n_modes``.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unsupported discretization scheme {scheme!r}; expected one of {SCHEMES}")
    if int(n_modes) != n_modes or n_modes < 1:
        raise ValueError(f"n_modes must be a positive integer, got {n_modes}")
    n_modes = int(n_modes)
    if J.family == "single":
        return DiscretizedBath(np.array([J.omega0]), np.array([J.g]), source=J)

    lo, hi = J.window() if window is None else (float(window[0]), float(window[1]))
    if not 0 <= lo < hi:
        raise ValueError(f"bad discretization window {(lo, hi)}")
    if scheme == "midpoint":
        width = (hi - lo) / n_modes
        nodes = lo + (np.arange(n_modes) + 0.5) * width
        weights = np.full(n_modes, width)
    else:
        x, w = np.polynomial.legendre.leggauss(n_modes)
        nodes = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
        weights = 0.5 * (hi - lo) * w
    g2 = weights * J(nodes)
    return DiscretizedBath(nodes, np.sqrt(g2), source=J)


def thermal_occupation(omega, beta):
    """Bose-Einstein occupation 1/(exp(beta*omega) - 1); zero in the vacuum."""
    w = np.asarray(omega, dtype=float)
    if np.any(w <= 0):
        raise ValueError("thermal occupation needs omega > 0")
    if math.isinf(beta):
        out = np.zeros_like(w)
    else:
        if not beta > 0:
            raise ValueError("beta must be > 0")
        out = 1.0 / np.expm1(beta * w)
    return out if out.ndim else float(out)


def memory_kernel(J: SpectralDensity, Omega: float, tau, method: str = "auto",
                  rtol: float = 1e-8):
    """Bath correlation K(tau) = int dw J(w) exp(-i (w - Omega) tau).

    ``method="auto"`` uses the closed form when one exists (single mode, flat
    band, exponential-cutoff ohmic) and adaptive Fourier quadrature otherwise;
    ``method="quad"`` forces quadrature.
    """
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0):
        raise ValueError("memory kernel is evaluated for tau >= 0")
    if method not in ("auto", "quad"):
        raise ValueError(f"unknown method {method!r}")
    if J.family == "single":
        return J.g**2 * np.exp(-1j * (J.omega0 - Omega) * tau)
    if J.family == "ohmic" and J.cutoff_shape not in CUTOFF_SHAPES:
        raise ValueError("power-law density without a cutoff diverges")

    if method == "auto":
        if J.family == "flat":
            lo, hi = J.band
            small = np.abs(tau) < 1e-8
            ts = np.where(small, 1.0, tau)
            val = J.scale * (np.exp(-1j * (hi - Omega) * ts) - np.exp(-1j * (lo - Omega) * ts)) / (-1j * ts)
            return np.where(small, J.scale * (hi - lo) * np.exp(-1j * (0.5 * (lo + hi) - Omega) * tau), val)
        if J.cutoff_shape == "exponential":
            a, wc = J.exponent, J.cutoff
            c = J.low_frequency_coefficient()
            return c * special.gamma(a + 1) * np.exp(1j * Omega * tau) / (1.0 / wc + 1j * tau) ** (a + 1)

    return _kernel_quad(J, Omega, tau, rtol)


def _kernel_quad(J, Omega, tau, rtol):
    lo, hi = J.support()
    flat = np.atleast_1d(tau).ravel()
    out = np.empty(flat.shape, dtype=complex)
    for i, t in enumerate(flat):
        if t == 0.0:
            re = integrate.quad(J, lo, hi, epsabs=0, epsrel=rtol, limit=200)[0]
            out[i] = re
            continue
        if math.isinf(hi):
            # QAWF: Fourier integral on [lo, inf)
            kw = dict(weight="cos", wvar=t, limlst=100)
            c = integrate.quad(J, lo, hi, epsabs=1e-14, **kw)[0]
            s = integrate.quad(J, lo, hi, epsabs=1e-14, weight="sin", wvar=t, limlst=100)[0]
        else:
            c = integrate.quad(J, lo, hi, weight="cos", wvar=t, epsabs=0, epsrel=rtol, limit=400)[0]
            s = integrate.quad(J, lo, hi, weight="sin", wvar=t, epsabs=0, epsrel=rtol, limit=400)[0]
        out[i] = (c - 1j * s) * np.exp(1j * Omega * t)
    return out.reshape(np.shape(tau))
