"""Exact finite-mode dynamics in excitation-number sectors.

The rotating-wave Hamiltonian conserves ``qubit bit + total boson number``,
so the Hilbert space truncated at total excitation ``M`` splits into
independent sectors ``K = 0..M`` and nothing inside a sector is
approximated.  Sector ``K`` holds the states ``|e, n>`` with ``|n| = K-1``
followed by ``|g, n>`` with ``|n| = K``.

The initial reservoir state is the Gibbs state restricted to boson
configurations with ``|n| <= M-1`` (the largest set on which both qubit
columns of the propagator are complete) and renormalized there.  The Gibbs
weight captured by that set is the truncation-health metric.

All thermal averages are evaluated from one eigendecomposition per sector:

    sum_cols w_c sum_rows r_m |<m|exp(-iHt)|c>|^2 = sum_jl C_jl cos((E_j - E_l) t)

with ``C = (V^T R V) o (V^T W V)``, so a time grid costs ``O(d^2)`` per point.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from threadpoolctl import threadpool_limits

from .bath import DiscretizedBath, ModelParams, thermal_occupation

DEFAULT_MIN_WEIGHT = 0.999
# time points per chunk are chosen so a chunk holds about this many numbers
_CHUNK_ELEMENTS = 2_000_000


class TruncationError(RuntimeError):
    """The truncated basis misses too much of the initial Gibbs weight."""

    def __init__(self, weight, threshold, M):
        self.weight, self.threshold, self.M = weight, threshold, M
        super().__init__(
            f"truncation M={M} captures Gibbs weight {weight:.6f} < {threshold}; increase M "
            f"or lower the temperature")


class SectorBasis:
    """Enumeration of the truncated product basis, grouped by total excitation.

    Boson configurations of a given total ``K`` are listed in the order of
    ``itertools.combinations_with_replacement`` over mode indices, which puts
    ``(K, 0, ..., 0)`` first.  Levels are built on first use, so a basis for
    many modes stays cheap when only low sectors are touched.
    """

    def __init__(self, n_modes: int, max_excitations: int):
        if int(n_modes) != n_modes or n_modes < 1:
            raise ValueError(f"n_modes must be a positive integer, got {n_modes}")
        if int(max_excitations) != max_excitations or max_excitations < 1:
            raise ValueError(f"max_excitations must be an integer >= 1, got {max_excitations}")
        self.N = int(n_modes)
        self.M = int(max_excitations)
        self._levels: dict[int, np.ndarray] = {}
        self._index: dict[int, dict[bytes, int]] = {}

    def level(self, K: int) -> np.ndarray:
        """Occupation vectors with total ``K``, shape (count, N)."""
        if not 0 <= K <= self.M:
            raise IndexError(f"boson level {K} outside 0..{self.M}")
        if K not in self._levels:
            combos = itertools.combinations_with_replacement(range(self.N), K)
            occ = np.array([np.bincount(c, minlength=self.N) for c in combos], dtype=np.int64)
            occ = occ.reshape(-1, self.N)
            self._levels[K] = occ
            self._index[K] = {row.tobytes(): i for i, row in enumerate(occ)}
        return self._levels[K]

    def level_size(self, K: int) -> int:
        if K < 0:
            return 0
        return math.comb(self.N + K - 1, K)

    def boson_index(self, occupation) -> tuple[int, int]:
        """(level, position) of an occupation vector."""
        occ = np.asarray(occupation, dtype=np.int64)
        K = int(occ.sum())
        self.level(K)
        try:
            return K, self._index[K][occ.tobytes()]
        except KeyError:
            raise KeyError(f"{tuple(occ)} is not a valid occupation vector") from None

    def sector_size(self, K: int) -> int:
        return (self.level_size(K - 1) if K >= 1 else 0) + self.level_size(K)

    def sector_states(self, K: int) -> list[tuple[int, tuple]]:
        """States of sector K as (qubit bit, occupations); bit 1 = excited."""
        out = []
        if K >= 1:
            out += [(1, tuple(int(x) for x in n)) for n in self.level(K - 1)]
        out += [(0, tuple(int(x) for x in n)) for n in self.level(K)]
        return out

    def state_index(self, bit: int, occupation) -> tuple[int, int]:
        """(sector, position inside the sector) of a product state."""
        level, pos = self.boson_index(occupation)
        K = level + bit
        if K > self.M:
            raise KeyError("state exceeds the excitation cutoff")
        return K, (pos if bit == 1 else self.level_size(K - 1) + pos)

    def boson_offsets(self) -> np.ndarray:
        """Start offsets of each level inside the flattened boson space |n| <= M."""
        sizes = [self.level_size(K) for K in range(self.M + 1)]
        return np.concatenate([[0], np.cumsum(sizes)])

    @property
    def boson_dim(self) -> int:
        return int(self.boson_offsets()[-1])

    @property
    def dim(self) -> int:
        return sum(self.sector_size(K) for K in range(self.M + 1))


@dataclass
class SectorHamiltonian:
    """Block-diagonal Hamiltonian: one real symmetric matrix per sector."""

    basis: SectorBasis
    bath: DiscretizedBath
    params: ModelParams
    _blocks: dict = field(default_factory=dict, repr=False)

    def block(self, K: int) -> np.ndarray:
        if K not in self._blocks:
            self._blocks[K] = _sector_block(self.basis, self.bath, self.params, K)
        return self._blocks[K]

    def free(self, K: int) -> np.ndarray:
        """Diagonal of the uncoupled part on sector K."""
        return np.diag(_sector_block(self.basis, self.bath, self.params, K, coupled=False)).copy()

    def dense(self) -> np.ndarray:
        """Full matrix over all sectors in basis order (small problems only)."""
        return linalg.block_diag(*[self.block(K) for K in range(self.basis.M + 1)])


def build_hamiltonian(bath: DiscretizedBath, params: ModelParams, basis: SectorBasis) -> SectorHamiltonian:
    """Per-sector rotating-wave Hamiltonian for ``bath`` coupled with scale ``params.lam``."""
    if bath.n_modes != basis.N:
        raise ValueError(f"basis built for {basis.N} modes but bath has {bath.n_modes}")
    return SectorHamiltonian(basis, bath, params)


def _sector_block(basis, bath, params, K, coupled=True):
    Om, w = params.Omega, bath.omega
    lower = basis.level(K - 1) if K >= 1 else np.zeros((0, basis.N), dtype=np.int64)
    upper = basis.level(K)
    ne = lower.shape[0]
    diag = np.concatenate([0.5 * Om + lower @ w, -0.5 * Om + upper @ w])
    H = np.diag(diag)
    if coupled and ne and params.lam != 0:
        gk = params.lam * bath.g
        index = basis._index[K]
        for i, n in enumerate(lower):
            for k in range(basis.N):
                if gk[k] == 0:
                    continue
                m = n.copy()
                m[k] += 1
                j = ne + index[m.tobytes()]
                H[i, j] = H[j, i] = gk[k] * math.sqrt(n[k] + 1)
    if not np.all(np.isfinite(H)):
        raise ValueError(f"non-finite Hamiltonian entries in sector {K}")
    return H


@dataclass(frozen=True)
class SectorEigen:
    K: int
    n_excited: int
    energies: np.ndarray
    vectors: np.ndarray
    free: np.ndarray


@dataclass(frozen=True)
class ConditionedPropagators:
    """Qubit-conditioned boson blocks of the interaction-picture propagator.

    Blocks act on the flattened boson space ``|n| <= M`` (see
    :meth:`SectorBasis.boson_offsets`).  ``pp`` keeps the qubit excited,
    ``mm`` keeps it in the ground state, ``mp`` takes excited to ground and
    ``pm`` ground to excited.  Columns with ``|n| = M`` of the excited-start
    blocks are zero since ``|e, n>`` lies above the cutoff there.
    """

    t: float
    pp: np.ndarray
    mm: np.ndarray
    mp: np.ndarray
    pm: np.ndarray


class Propagator:
    """Cached per-sector eigendecomposition of a :class:`SectorHamiltonian`."""

    def __init__(self, H: SectorHamiltonian, threads: int = 1):
        self.H = H
        self.threads = max(1, int(threads))
        self._eig: dict[int, SectorEigen] = {}

    @property
    def basis(self) -> SectorBasis:
        return self.H.basis

    def eigen(self, K: int) -> SectorEigen:
        if K not in self._eig:
            block = self.H.block(K)
            E, V = linalg.eigh(block)
            self._eig[K] = SectorEigen(K, self.basis.level_size(K - 1) if K >= 1 else 0,
                                       E, V, self.H.free(K))
        return self._eig[K]

    def prepare(self, sectors) -> None:
        """Diagonalize the listed sectors, in parallel when ``threads > 1``."""
        todo = [K for K in sectors if K not in self._eig]
        if self.threads == 1 or len(todo) < 2:
            for K in todo:
                self.eigen(K)
            return
        blocks = [self.H.block(K) for K in todo]
        with ThreadPoolExecutor(self.threads) as pool:
            results = list(pool.map(linalg.eigh, blocks))
        for K, (E, V) in zip(todo, results):
            self._eig[K] = SectorEigen(K, self.basis.level_size(K - 1) if K >= 1 else 0,
                                       E, V, self.H.free(K))

    def sector_unitary(self, K: int, t: float) -> np.ndarray:
        """exp(-i H_K t) on sector K."""
        e = self.eigen(K)
        return (e.vectors * np.exp(-1j * e.energies * t)) @ e.vectors.T

    def propagate(self, t: float) -> ConditionedPropagators:
        """Interaction-picture propagator exp(iH0 t) exp(-iH t) split by qubit state."""
        if t < 0:
            raise ValueError("propagate needs t >= 0")
        b = self.basis
        off = b.boson_offsets()
        D = b.boson_dim
        blocks = {name: np.zeros((D, D), dtype=complex) for name in ("pp", "mm", "mp", "pm")}
        for K in range(b.M + 1):
            e = self.eigen(K)
            U = np.exp(1j * e.free * t)[:, None] * self.sector_unitary(K, t)
            ne = e.n_excited
            g_sl = slice(off[K], off[K + 1])
            blocks["mm"][g_sl, g_sl] = U[ne:, ne:]
            if ne:
                e_sl = slice(off[K - 1], off[K])
                blocks["pp"][e_sl, e_sl] = U[:ne, :ne]
                blocks["mp"][g_sl, e_sl] = U[ne:, :ne]
                blocks["pm"][e_sl, g_sl] = U[:ne, ne:]
        return ConditionedPropagators(float(t), **blocks)


def propagate(H: SectorHamiltonian, t: float) -> ConditionedPropagators:
    return Propagator(H).propagate(t)


# -- thermal initial state ---------------------------------------------------

def gibbs_level_weights(bath: DiscretizedBath, params: ModelParams, basis: SectorBasis, K: int) -> np.ndarray:
    """Unnormalized product-Gibbs weights exp(-beta w.n) of level K."""
    occ = basis.level(K)
    if params.is_vacuum:
        return (occ.sum(axis=1) == 0).astype(float)
    return np.exp(-params.beta * (occ @ bath.omega))


def captured_gibbs_weight(bath: DiscretizedBath, params: ModelParams, max_bosons: int) -> float:
    """Probability of ``|n| <= max_bosons`` under the untruncated product Gibbs state."""
    if params.is_vacuum:
        return 1.0
    n = np.arange(max_bosons + 1)
    dist = np.zeros(max_bosons + 1)
    dist[0] = 1.0
    for w in bath.omega:
        q = math.exp(-params.beta * w)
        dist = np.convolve(dist, (1.0 - q) * q**n)[: max_bosons + 1]
    return float(dist.sum())


def _reservoir_weights(bath, params, basis):
    """Normalized initial weights per level 0..M-1 and the partition sum."""
    raw = [gibbs_level_weights(bath, params, basis, K) for K in range(basis.M)]
    Z = math.fsum(float(np.sum(r)) for r in raw)
    return [r / Z for r in raw]


def truncation_health(bath: DiscretizedBath, params: ModelParams, M: int) -> float:
    return captured_gibbs_weight(bath, params, M - 1)


# -- map coefficients --------------------------------------------------------

@dataclass(frozen=True)
class MapCoefficients:
    """Exact map coefficients on a time grid.

    ``alpha``/``gamma`` start from the ground state (stay / flip up),
    ``xi``/``zeta`` start excited (stay / decay) and ``eta`` multiplies the
    coherence.  ``D = alpha + xi - 1``.
    """

    t: np.ndarray
    alpha: np.ndarray
    xi: np.ndarray
    gamma: np.ndarray
    zeta: np.ndarray
    eta: np.ndarray
    health: float = 1.0

    @property
    def D(self) -> np.ndarray:
        return self.alpha + self.xi - 1.0

    def at(self, i: int) -> "MapCoefficients":
        """Single grid point as a length-1 series."""
        s = slice(i, i + 1) if i != -1 else slice(-1, None)
        return MapCoefficients(self.t[s], self.alpha[s], self.xi[s], self.gamma[s],
                               self.zeta[s], self.eta[s], self.health)

    def __len__(self):
        return len(self.t)

    @classmethod
    def from_arrays(cls, t, alpha, xi, gamma, zeta, eta, health=1.0):
        arr = lambda x, dt=float: np.atleast_1d(np.asarray(x, dtype=dt))
        return cls(arr(t), arr(alpha), arr(xi), arr(gamma), arr(zeta), arr(eta, complex), health)


def _cos_form(C, E, times):
    """sum_jl C_jl cos((E_j - E_l) t) for symmetric real C, chunked over t."""
    out = np.empty(len(times))
    step = max(1, _CHUNK_ELEMENTS // max(1, len(E)))
    for a in range(0, len(times), step):
        ph = np.multiply.outer(E, times[a:a + step])
        c, s = np.cos(ph), np.sin(ph)
        out[a:a + step] = np.einsum("jt,jt->t", c, C @ c) + np.einsum("jt,jt->t", s, C @ s)
    return out


def _cross_form(C, E_left, E_right, times):
    """sum_jl C_jl exp(i E_left_j t) exp(-i E_right_l t), chunked over t."""
    out = np.empty(len(times), dtype=complex)
    step = max(1, _CHUNK_ELEMENTS // max(1, len(E_left) + len(E_right)))
    for a in range(0, len(times), step):
        tt = times[a:a + step]
        x = np.exp(-1j * np.multiply.outer(E_right, tt))
        y = np.exp(1j * np.multiply.outer(E_left, tt))
        out[a:a + step] = np.einsum("jt,jt->t", y, C @ x)
    return out


def _weighted_gram(V, w):
    return (V.T * w) @ V


def _sector_terms(prop: Propagator, K: int, weights, times):
    """Contributions of sector K to (alpha, xi, gamma, zeta) and of the pair (K, K-1) to eta."""
    M = prop.basis.M
    e = prop.eigen(K)
    ne = e.n_excited
    V = e.vectors
    Ve, Vg = V[:ne], V[ne:]
    nt = len(times)
    zero = np.zeros(nt)
    alpha = gamma = xi = zeta = zero
    eta = np.zeros(nt, dtype=complex)

    wg = weights[K] if K <= M - 1 else None
    we = weights[K - 1] if K >= 1 else None
    Ae = Ve.T @ Ve if ne else None
    Ag = Vg.T @ Vg
    if wg is not None and np.any(wg):
        Bg = _weighted_gram(Vg, wg)
        alpha = _cos_form(Ag * Bg, e.energies, times)
        if ne:
            gamma = _cos_form(Ae * Bg, e.energies, times)
    if we is not None and np.any(we):
        Be = _weighted_gram(Ve, we)
        xi = _cos_form(Ae * Be, e.energies, times)
        zeta = _cos_form(Ag * Be, e.energies, times)
        # eta pairs the excited columns of sector K with the ground columns of sector K-1
        lower = prop.eigen(K - 1)
        V0 = lower.vectors[lower.n_excited:]
        C = (Ve.T @ V0) * _weighted_gram_cross(Ve, V0, we)
        eta = _cross_form(C, e.energies, lower.energies, times) * np.exp(-1j * prop.H.params.Omega * times)
    return alpha, xi, gamma, zeta, eta


def _weighted_gram_cross(A, B, w):
    return (A.T * w) @ B


def _needed_sectors(weights, M):
    """Sectors holding a weighted column: K for ground columns, K+1 for excited ones."""
    need = set()
    for K in range(M):
        if np.any(weights[K]):
            need.update((K, K + 1))
    return sorted(need)


def map_coefficients(bath: DiscretizedBath, params: ModelParams, basis: SectorBasis, times,
                     *, min_weight: float = DEFAULT_MIN_WEIGHT, threads: int = 1,
                     propagator: Propagator | None = None) -> MapCoefficients:
    """Thermal-averaged map coefficients from the exact sector propagator.

    All four population coefficients are computed from their own blocks, so
    ``alpha + gamma = 1`` and ``xi + zeta = 1`` are genuine checks.  Raises
    :class:`TruncationError` when the initial Gibbs weight captured by the
    basis is below ``min_weight``.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or np.any(times < 0):
        raise ValueError("times must be a 1-D grid of non-negative values")
    health = truncation_health(bath, params, basis.M)
    if health < min_weight:
        raise TruncationError(health, min_weight, basis.M)
    H = build_hamiltonian(bath, params, basis)
    prop = propagator or Propagator(H, threads)
    weights = _reservoir_weights(bath, params, basis)
    sectors = _needed_sectors(weights, basis.M)

    with threadpool_limits(limits=1):
        prop.prepare(sectors)
        work = sectors
        if prop.threads > 1 and len(work) > 1:
            with ThreadPoolExecutor(prop.threads) as pool:
                parts = list(pool.map(lambda K: _sector_terms(prop, K, weights, times), work))
        else:
            parts = [_sector_terms(prop, K, weights, times) for K in work]

    # fixed sector order keeps the sums independent of the thread count
    acc = [np.zeros(len(times)) for _ in range(4)] + [np.zeros(len(times), dtype=complex)]
    for part in parts:
        for a, p in zip(acc, part):
            a += p
    alpha, xi, gamma, zeta, eta = acc
    return MapCoefficients(times, alpha, xi, gamma, zeta, eta, health)


def convergence_check(bath: DiscretizedBath, params: ModelParams, M: int, times,
                      *, min_weight: float = DEFAULT_MIN_WEIGHT, threads: int = 1) -> dict:
    """Largest change of alpha, xi and eta when the cutoff goes from M to M+1."""
    a = map_coefficients(bath, params, SectorBasis(bath.n_modes, M), times,
                         min_weight=min_weight, threads=threads)
    b = map_coefficients(bath, params, SectorBasis(bath.n_modes, M + 1), times,
                         min_weight=min_weight, threads=threads)
    return {
        "M": M,
        "alpha": float(np.max(np.abs(a.alpha - b.alpha))),
        "xi": float(np.max(np.abs(a.xi - b.xi))),
        "eta": float(np.max(np.abs(a.eta - b.eta))),
    }


# -- reservoir diagnostics ---------------------------------------------------

def _initial_populations(rho_qubit0):
    rho = np.asarray(rho_qubit0, dtype=complex)
    if rho.shape != (2, 2):
        raise ValueError("qubit state must be a 2x2 matrix")
    if not np.allclose(rho, rho.conj().T, atol=1e-12):
        raise ValueError("qubit state must be Hermitian")
    if abs(np.trace(rho) - 1) > 1e-10:
        raise ValueError("qubit state must have unit trace")
    if np.min(np.linalg.eigvalsh(rho)) < -1e-12:
        raise ValueError("qubit state must be positive semidefinite")
    return rho


def initial_occupations(bath: DiscretizedBath, params: ModelParams, basis: SectorBasis) -> np.ndarray:
    """Per-mode occupations of the truncated, renormalized initial reservoir state."""
    weights = _reservoir_weights(bath, params, basis)
    return sum(w @ basis.level(K) for K, w in enumerate(weights))


def mode_occupations(bath: DiscretizedBath, params: ModelParams, basis: SectorBasis, rho_qubit0,
                     times, *, min_weight: float = DEFAULT_MIN_WEIGHT, threads: int = 1) -> np.ndarray:
    """<a_k^dag a_k>(t) for every mode, shape (len(times), N).

    Mode numbers commute with the sector structure, so only the qubit
    populations of ``rho_qubit0`` matter.
    """
    rho = _initial_populations(rho_qubit0)
    pe, pg = rho[0, 0].real, rho[1, 1].real
    times = np.asarray(times, dtype=float)
    health = truncation_health(bath, params, basis.M)
    if health < min_weight:
        raise TruncationError(health, min_weight, basis.M)
    prop = Propagator(build_hamiltonian(bath, params, basis), threads)
    weights = _reservoir_weights(bath, params, basis)
    sectors = _needed_sectors(weights, basis.M)

    def one(K):
        e = prop.eigen(K)
        ne = e.n_excited
        cols = np.zeros(e.vectors.shape[0])
        if K >= 1:
            cols[:ne] = pe * weights[K - 1]
        if K <= basis.M - 1:
            cols[ne:] = pg * weights[K]
        if not np.any(cols):
            return np.zeros((len(times), basis.N))
        B = _weighted_gram(e.vectors, cols)
        rows = np.vstack([basis.level(K - 1) if K >= 1 else np.zeros((0, basis.N)), basis.level(K)])
        return np.stack([_cos_form(_weighted_gram(e.vectors, rows[:, k]) * B, e.energies, times)
                         for k in range(basis.N)], axis=1)

    with threadpool_limits(limits=1):
        prop.prepare(sectors)
        if prop.threads > 1 and len(sectors) > 1:
            with ThreadPoolExecutor(prop.threads) as pool:
                parts = list(pool.map(one, sectors))
        else:
            parts = [one(K) for K in sectors]
    out = np.zeros((len(times), basis.N))
    for p in parts:
        out += p
    return out


@dataclass(frozen=True)
class ReservoirState:
    t: float
    rho: np.ndarray
    occupations: np.ndarray


def reservoir_state(bath: DiscretizedBath, params: ModelParams, basis: SectorBasis, rho_qubit0,
                    t: float, *, min_weight: float = DEFAULT_MIN_WEIGHT) -> ReservoirState:
    """Dense reduced reservoir state at one time, on the boson space |n| <= M.

    Built as ``sum_out sum_{s,s'} rho_{ss'} P_{out,s} rho_a P_{out,s'}^dag``
    from the conditioned blocks.  Meant for small bases.
    """
    rho = _initial_populations(rho_qubit0)
    health = truncation_health(bath, params, basis.M)
    if health < min_weight:
        raise TruncationError(health, min_weight, basis.M)
    prop = Propagator(build_hamiltonian(bath, params, basis))
    P = prop.propagate(t)
    weights = _reservoir_weights(bath, params, basis)
    ra = np.diag(np.concatenate(weights + [np.zeros(basis.level_size(basis.M))])).astype(complex)
    # qubit index 0 = excited, 1 = ground
    blocks = {(0, 0): P.pp, (1, 1): P.mm, (1, 0): P.mp, (0, 1): P.pm}
    out = np.zeros_like(ra)
    for o in (0, 1):
        for s in (0, 1):
            for sp in (0, 1):
                if rho[s, sp] != 0:
                    out += rho[s, sp] * blocks[(o, s)] @ ra @ blocks[(o, sp)].conj().T
    occ_all = np.vstack([basis.level(K) for K in range(basis.M + 1)])
    occupations = np.real(np.diag(out)) @ occ_all
    return ReservoirState(float(t), out, occupations)


def thermal_reference(bath: DiscretizedBath, params: ModelParams) -> np.ndarray:
    """Untruncated Bose-Einstein occupations of the modes."""
    return np.asarray(thermal_occupation(bath.omega, params.beta), dtype=float)
