"""Qubit states, the exact phase-covariant map, its Kraus form and populations.

Basis order is {excited, ground} everywhere: ``rho[0, 0] = rho_ee`` and
``rho[0, 1] = rho_eg``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exact import MapCoefficients

SIGMA_PLUS = np.array([[0, 1], [0, 0]], dtype=complex)   # |e><g|
SIGMA_MINUS = np.array([[0, 0], [1, 0]], dtype=complex)  # |g><e|
P_EXCITED = np.diag([1.0, 0.0]).astype(complex)
P_GROUND = np.diag([0.0, 1.0]).astype(complex)

NAMED_STATES = {
    "excited": np.array([[1, 0], [0, 0]], dtype=complex),
    "ground": np.array([[0, 0], [0, 1]], dtype=complex),
    "plus": np.full((2, 2), 0.5, dtype=complex),
    "plus_i": np.array([[0.5, -0.5j], [0.5j, 0.5]], dtype=complex),
}

UNITARITY_TOL = 1e-8
SCHWARZ_TOL = 1e-10
POSITIVITY_TOL = 1e-12


class MapInvariantError(ValueError):
    """A map coefficient point is outside the set of valid maps."""


def qubit_state(spec, tol: float = 1e-10) -> np.ndarray:
    """Validated 2x2 density matrix from a preset name or an explicit matrix."""
    if isinstance(spec, str):
        try:
            return NAMED_STATES[spec].copy()
        except KeyError:
            raise ValueError(f"unknown qubit state {spec!r}; presets: {sorted(NAMED_STATES)}") from None
    rho = np.asarray(spec, dtype=complex)
    if rho.shape != (2, 2):
        raise ValueError(f"qubit state must be 2x2, got shape {rho.shape}")
    if np.max(np.abs(rho - rho.conj().T)) > tol:
        raise ValueError("qubit state is not Hermitian")
    if abs(np.trace(rho).real - 1) > tol:
        raise ValueError(f"qubit state trace is {np.trace(rho).real}, expected 1")
    if np.min(np.linalg.eigvalsh(rho)) < -tol:
        raise ValueError("qubit state is not positive semidefinite")
    return 0.5 * (rho + rho.conj().T)


def basis_states() -> list[np.ndarray]:
    """Four states whose images fix a qubit map: excited, ground, plus, plus_i."""
    return [NAMED_STATES[k].copy() for k in ("excited", "ground", "plus", "plus_i")]


def check_coefficients(c: MapCoefficients, unitarity_tol=UNITARITY_TOL, schwarz_tol=SCHWARZ_TOL):
    """Raise :class:`MapInvariantError` naming the first offending grid index."""
    checks = (
        ("alpha + gamma - 1", np.abs(c.alpha + c.gamma - 1), unitarity_tol),
        ("xi + zeta - 1", np.abs(c.xi + c.zeta - 1), unitarity_tol),
        ("|eta|^2 - alpha*xi", np.abs(c.eta) ** 2 - c.alpha * c.xi, schwarz_tol),
    )
    for name, err, tol in checks:
        bad = np.flatnonzero(err > tol)
        if bad.size:
            i = int(bad[0])
            raise MapInvariantError(f"{name} = {err[i]:.3g} exceeds {tol:g} at grid index {i} (t={c.t[i]:g})")
    for name in ("alpha", "xi", "gamma", "zeta"):
        v = getattr(c, name)
        bad = np.flatnonzero((v < -unitarity_tol) | (v > 1 + unitarity_tol))
        if bad.size:
            i = int(bad[0])
            raise MapInvariantError(f"{name} = {v[i]:.3g} outside [0, 1] at grid index {i}")


def apply_map(c: MapCoefficients, rho0, check: bool = True) -> np.ndarray:
    """Image of ``rho0`` at every grid point of ``c``, shape (len(c), 2, 2)."""
    rho0 = qubit_state(rho0)
    if check:
        check_coefficients(c)
    ee, gg, eg = rho0[0, 0].real, rho0[1, 1].real, rho0[0, 1]
    out = np.empty((len(c), 2, 2), dtype=complex)
    out[:, 0, 0] = c.xi * ee + c.gamma * gg
    out[:, 1, 1] = c.zeta * ee + c.alpha * gg
    out[:, 0, 1] = np.conj(c.eta) * eg
    out[:, 1, 0] = c.eta * np.conj(eg)
    return out


@dataclass(frozen=True)
class KrausSet:
    operators: tuple

    def completeness_error(self) -> float:
        s = sum(K.conj().T @ K for K in self.operators)
        return float(np.max(np.abs(s - np.eye(2))))

    def apply(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=complex)
        return sum(K @ rho @ K.conj().T for K in self.operators)


def kraus(c: MapCoefficients, index: int = 0, schwarz_tol: float = SCHWARZ_TOL) -> KrausSet:
    """The four operators sqrt(gamma) s+, sqrt(zeta) s-, sqrt(xi)(P_e + eta/xi P_g), sqrt(alpha - |eta|^2/xi) P_g."""
    a, x, g, z, e = (float(c.alpha[index]), float(c.xi[index]), float(c.gamma[index]),
                     float(c.zeta[index]), complex(c.eta[index]))
    if x <= 0:
        raise MapInvariantError(f"xi = {x:g} at grid index {index}: Kraus form degenerate")
    rest = a - abs(e) ** 2 / x
    if rest < -schwarz_tol:
        raise MapInvariantError(f"Schwarz inequality violated by {-rest:.3g} at grid index {index}")
    ops = (
        np.sqrt(max(g, 0.0)) * SIGMA_PLUS,
        np.sqrt(max(z, 0.0)) * SIGMA_MINUS,
        np.sqrt(x) * (P_EXCITED + (e / x) * P_GROUND),
        np.sqrt(max(rest, 0.0)) * P_GROUND,
    )
    return KrausSet(ops)


def transition_matrix(c: MapCoefficients) -> np.ndarray:
    """Column-stochastic population matrices [[xi, gamma], [zeta, alpha]], shape (len(c), 2, 2)."""
    return np.stack([np.stack([c.xi, c.gamma], -1), np.stack([c.zeta, c.alpha], -1)], -2)


def populations(c: MapCoefficients, p0) -> np.ndarray:
    """(p_excited, p_ground) at every grid point, shape (len(c), 2)."""
    p0 = np.asarray(p0, dtype=float)
    if p0.shape != (2,) or np.any(p0 < 0) or abs(p0.sum() - 1) > 1e-12:
        raise ValueError(f"initial populations must be a non-negative pair summing to 1, got {p0}")
    return transition_matrix(c) @ p0


def trace_distance(a, b) -> np.ndarray:
    """Half the trace norm of a - b for stacks of 2x2 Hermitian matrices."""
    d = np.asarray(a) - np.asarray(b)
    # eigenvalues of a traceless-part 2x2 Hermitian matrix: t/2 +- sqrt(((d00-d11)/2)^2 + |d01|^2)
    tr = (d[..., 0, 0] + d[..., 1, 1]).real
    r = np.sqrt(((d[..., 0, 0] - d[..., 1, 1]).real / 2) ** 2 + np.abs(d[..., 0, 1]) ** 2)
    return 0.5 * (np.abs(tr / 2 + r) + np.abs(tr / 2 - r))


def validity_report(c: MapCoefficients, rho0) -> dict:
    """Worst-case trace, positivity, unitarity and Schwarz figures over the grid."""
    rho = apply_map(c, rho0, check=False)
    tr = np.abs(rho[:, 0, 0] + rho[:, 1, 1] - 1)
    det = (rho[:, 0, 0] * rho[:, 1, 1] - rho[:, 0, 1] * rho[:, 1, 0]).real
    min_eig = np.min(np.linalg.eigvalsh(rho), axis=1)
    return {
        "trace_error": float(tr.max()),
        "min_eigenvalue": float(min_eig.min()),
        "min_determinant": float(det.min()),
        "unitarity_alpha_gamma": float(np.max(np.abs(c.alpha + c.gamma - 1))),
        "unitarity_xi_zeta": float(np.max(np.abs(c.xi + c.zeta - 1))),
        "schwarz_excess": float(np.max(np.abs(c.eta) ** 2 - c.alpha * c.xi)),
    }
