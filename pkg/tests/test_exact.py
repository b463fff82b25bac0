import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import linalg

from rwaqubit.bath import DiscretizedBath, ModelParams, SpectralDensity, discretize
from rwaqubit.exact import (Propagator, SectorBasis, TruncationError, build_hamiltonian,
                            captured_gibbs_weight, convergence_check, initial_occupations,
                            map_coefficients, mode_occupations, propagate, reservoir_state,
                            truncation_health)

from conftest import JC_G


# -- enumeration ----------------------------------------------------------------

@given(st.integers(1, 4), st.integers(1, 5))
def test_enumeration_is_grouped_bijection(N, M):
    b = SectorBasis(N, M)
    seen = set()
    for K in range(M + 1):
        for pos, (bit, occ) in enumerate(b.sector_states(K)):
            assert bit + sum(occ) == K <= M
            assert b.state_index(bit, occ) == (K, pos)
            seen.add((bit, occ))
    assert len(seen) == b.dim
    assert b.dim == sum(b.sector_size(K) for K in range(M + 1))


def test_boson_levels_are_complete():
    b = SectorBasis(3, 4)
    assert b.boson_dim == math.comb(3 + 4, 4)
    with pytest.raises(KeyError):
        b.boson_index([1, -1, 0])


# -- Hamiltonian ----------------------------------------------------------------

def test_one_excitation_block_by_hand():
    g = 0.25
    H = build_hamiltonian(discretize(SpectralDensity.single(1.0, g), 1), ModelParams(1.0), SectorBasis(1, 1))
    np.testing.assert_allclose(H.block(1), [[0.5, g], [g, 0.5]], atol=1e-15)
    E = np.linalg.eigvalsh(H.block(1))
    assert E[1] - E[0] == pytest.approx(2 * g, rel=1e-14)


def test_zero_coupling_is_diagonal():
    bath = discretize(SpectralDensity.ohmic(0.1), 3)
    H = build_hamiltonian(bath, ModelParams(1.0, lam=0.0), SectorBasis(3, 3)).dense()
    assert np.count_nonzero(H - np.diag(np.diag(H))) == 0


@given(st.integers(1, 3), st.integers(1, 4), st.floats(0.0, 2.0))
def test_hamiltonian_hermitian(N, M, lam):
    bath = discretize(SpectralDensity.ohmic(0.2, 1.0, 1.0), N)
    H = build_hamiltonian(bath, ModelParams(1.0, lam=lam), SectorBasis(N, M)).dense()
    assert np.array_equal(H, H.conj().T)


def test_mode_count_mismatch():
    with pytest.raises(ValueError):
        build_hamiltonian(discretize(SpectralDensity.ohmic(0.1), 2), ModelParams(1.0), SectorBasis(3, 2))


# -- propagator -----------------------------------------------------------------

def _small_hamiltonian(lam=1.0, N=2, M=3):
    bath = discretize(SpectralDensity.ohmic(0.2, 1.0, 1.0), N, window=(0.5, 1.5))
    return build_hamiltonian(bath, ModelParams(1.0, lam=lam), SectorBasis(N, M))


def test_propagator_identity_at_zero_and_without_coupling():
    for H, t in ((_small_hamiltonian(), 0.0), (_small_hamiltonian(lam=0.0), 7.3)):
        P = propagate(H, t)
        D = H.basis.boson_dim
        top = H.basis.boson_offsets()[-2]
        np.testing.assert_allclose(P.mm, np.eye(D), atol=1e-13)
        # excited columns exist only below the cutoff
        np.testing.assert_allclose(P.pp[:top, :top], np.eye(top), atol=1e-13)
        assert np.max(np.abs(P.mp)) < 1e-13 and np.max(np.abs(P.pm)) < 1e-13


def test_jc_vacuum_column():
    g = 0.3
    H = build_hamiltonian(discretize(SpectralDensity.single(1.0, g), 1), ModelParams(1.0), SectorBasis(1, 1))
    for t in (0.4, 2.0, 9.0):
        P = propagate(H, t)
        assert P.pp[0, 0] == pytest.approx(math.cos(g * t), abs=1e-14)
        assert P.mp[1, 0] == pytest.approx(-1j * math.sin(g * t), abs=1e-14)


@given(st.floats(0.0, 50.0))
def test_block_unitarity(t):
    H = _small_hamiltonian()
    P = propagate(H, t)
    top = H.basis.boson_offsets()[-2]
    I = np.eye(H.basis.boson_dim)
    col_e = P.pp.conj().T @ P.pp + P.mp.conj().T @ P.mp
    col_g = P.mm.conj().T @ P.mm + P.pm.conj().T @ P.pm
    np.testing.assert_allclose(col_g, I, atol=1e-12)
    np.testing.assert_allclose(col_e[:top, :top], np.eye(top), atol=1e-12)


def test_threads_do_not_change_eigensystem():
    H = _small_hamiltonian(N=3, M=4)
    a, b = Propagator(H, 1), Propagator(H, 4)
    a.prepare(range(5))
    b.prepare(range(5))
    for K in range(5):
        assert np.array_equal(a.eigen(K).energies, b.eigen(K).energies)


# -- map coefficients -----------------------------------------------------------

def test_zero_coupling_map_is_identity():
    bath = discretize(SpectralDensity.ohmic(0.05), 2, window=(0.8, 1.2))
    params = ModelParams(1.0, math.log(2.0), 0.0)
    c = map_coefficients(bath, params, SectorBasis(2, 14), np.linspace(0, 50, 11))
    np.testing.assert_allclose(c.alpha, 1, atol=1e-12)
    np.testing.assert_allclose(c.xi, 1, atol=1e-12)
    np.testing.assert_allclose(c.eta, 1, atol=1e-12)
    np.testing.assert_allclose(c.gamma, 0, atol=1e-12)
    np.testing.assert_allclose(c.zeta, 0, atol=1e-12)


def test_jc_closed_form(jc):
    _, _, c = jc
    gt = JC_G * c.t
    np.testing.assert_allclose(c.xi, np.cos(gt) ** 2, atol=1e-12)
    np.testing.assert_allclose(c.zeta, np.sin(gt) ** 2, atol=1e-12)
    np.testing.assert_allclose(c.alpha, 1, atol=1e-12)
    np.testing.assert_allclose(c.gamma, 0, atol=1e-12)
    np.testing.assert_allclose(c.eta, np.cos(gt), atol=1e-12)
    np.testing.assert_allclose(c.D, np.cos(gt) ** 2, atol=1e-12)


def test_initial_values(small_thermal):
    *_, c = small_thermal
    assert c.alpha[0] == pytest.approx(1, abs=1e-12)
    assert c.xi[0] == pytest.approx(1, abs=1e-12)
    assert c.eta[0] == pytest.approx(1, abs=1e-12)


def test_thermal_unitarity(small_thermal):
    *_, c = small_thermal
    assert np.max(np.abs(c.alpha + c.gamma - 1)) < 1e-8
    assert np.max(np.abs(c.xi + c.zeta - 1)) < 1e-8
    assert np.max(np.abs(c.eta) ** 2 - c.alpha * c.xi) < 1e-10


def _dense_oracle(bath, params, M, times):
    """Tensor-product Fock space, matrix exponential, explicit partial traces."""
    N = bath.n_modes
    d = M + 1
    a = np.diag(np.sqrt(np.arange(1, d)), 1)
    eye = np.eye(d)

    def mode_op(op, k):
        out = np.array([[1.0]])
        for j in range(N):
            out = np.kron(out, op if j == k else eye)
        return out

    sp = np.array([[0, 1], [0, 0]])
    sz = np.diag([1.0, -1.0])
    Ib = np.eye(d**N)
    H0 = 0.5 * params.Omega * np.kron(sz, Ib)
    V = np.zeros_like(H0)
    for k in range(N):
        ak = mode_op(a, k)
        H0 = H0 + bath.omega[k] * np.kron(np.eye(2), ak.T @ ak)
        V = V + params.lam * bath.g[k] * (np.kron(sp, ak) + np.kron(sp.T, ak.T))
    H = H0 + V
    # product Gibbs state restricted to |n| <= M - 1, renormalized
    nums = np.rint([np.diag(mode_op(a, k).T @ mode_op(a, k)) for k in range(N)])
    total = nums.sum(axis=0)
    w = np.exp(-params.beta * (bath.omega @ nums)) * (total <= M - 1)
    rho_a = np.diag(w / w.sum())
    e, g = np.diag([1.0, 0.0]), np.diag([0.0, 1.0])
    out = {k: [] for k in ("alpha", "xi", "eta")}
    for t in times:
        U = linalg.expm(-1j * H * t)
        U0 = linalg.expm(1j * H0 * t)
        UI = U0 @ U

        def evolve(q):
            r = UI @ np.kron(q, rho_a) @ UI.conj().T
            return np.einsum("aibi->ab", r.reshape(2, d**N, 2, d**N))

        out["alpha"].append(evolve(g)[1, 1].real)
        out["xi"].append(evolve(e)[0, 0].real)
        # rho_eg(t) = conj(eta) rho_eg(0); feed |e><g|
        out["eta"].append(np.conj(evolve(np.array([[0, 1], [0, 0]]))[0, 1]))
    return {k: np.array(v) for k, v in out.items()}


def test_against_dense_tensor_product_oracle():
    bath = DiscretizedBath([0.9, 1.15], [0.08, 0.05])
    params = ModelParams(1.0, 1.2, 1.0)
    M = 4
    times = np.array([0.0, 1.3, 6.0, 17.0])
    c = map_coefficients(bath, params, SectorBasis(2, M), times, min_weight=0.0)
    ref = _dense_oracle(bath, params, M, times)
    np.testing.assert_allclose(c.alpha, ref["alpha"], atol=1e-12)
    np.testing.assert_allclose(c.xi, ref["xi"], atol=1e-12)
    np.testing.assert_allclose(c.eta, ref["eta"], atol=1e-12)


def test_threads_give_identical_coefficients(small_thermal):
    bath, params, basis, c = small_thermal
    c4 = map_coefficients(bath, params, SectorBasis(basis.N, basis.M), c.t, threads=4)
    for name in ("alpha", "xi", "gamma", "zeta", "eta"):
        assert np.array_equal(getattr(c, name), getattr(c4, name))


def test_truncation_abort():
    bath = discretize(SpectralDensity.ohmic(0.05), 2, window=(0.8, 1.2))
    params = ModelParams(1.0, math.log(2.0))
    with pytest.raises(TruncationError) as err:
        map_coefficients(bath, params, SectorBasis(2, 3), [0.0, 1.0])
    assert err.value.M == 3
    assert truncation_health(bath, params, 3) == pytest.approx(err.value.weight)


def test_captured_weight_single_mode_geometric():
    # one mode with n = 1: P(k) = 2^-(k+1)
    bath = DiscretizedBath([1.0], [0.1])
    w = captured_gibbs_weight(bath, ModelParams(1.0, math.log(2.0)), 3)
    assert w == pytest.approx(1 - 2.0**-4, rel=1e-14)


def test_convergence_in_the_cutoff():
    bath = discretize(SpectralDensity.ohmic(0.05), 2, window=(0.8, 1.2))
    params = ModelParams(1.0, math.log(2.0))
    times = np.linspace(0, 30, 31)
    lo = convergence_check(bath, params, 12, times, min_weight=0.99)
    hi = convergence_check(bath, params, 16, times, min_weight=0.99)
    assert max(hi["alpha"], hi["xi"], hi["eta"]) < max(lo["alpha"], lo["xi"], lo["eta"])
    assert max(hi["alpha"], hi["xi"], hi["eta"]) < 1e-3


# -- reservoir ------------------------------------------------------------------

def test_reservoir_static_without_coupling():
    bath = DiscretizedBath([0.9, 1.1], [0.1, 0.1])
    params = ModelParams(1.0, 1.5, 0.0)
    basis = SectorBasis(2, 5)
    r0 = reservoir_state(bath, params, basis, np.diag([0.3, 0.7]), 0.0, min_weight=0.9)
    r1 = reservoir_state(bath, params, basis, np.diag([0.3, 0.7]), 12.0, min_weight=0.9)
    np.testing.assert_allclose(r1.rho, r0.rho, atol=1e-13)
    np.testing.assert_allclose(r1.occupations, initial_occupations(bath, params, basis), atol=1e-13)


def test_reservoir_stays_empty_from_ground_and_vacuum():
    bath = DiscretizedBath([0.9, 1.1], [0.1, 0.2])
    basis = SectorBasis(2, 3)
    r = reservoir_state(bath, ModelParams(1.0), basis, np.diag([0.0, 1.0]), 5.0)
    ref = np.zeros_like(r.rho)
    ref[0, 0] = 1.0
    np.testing.assert_allclose(r.rho, ref, atol=1e-14)


def test_mode_occupations_match_dense_state():
    bath = DiscretizedBath([0.9, 1.1], [0.1, 0.2])
    params = ModelParams(1.0, 1.5)
    basis = SectorBasis(2, 6)
    rho = np.diag([0.4, 0.6])
    times = np.array([0.0, 3.0, 11.0])
    occ = mode_occupations(bath, params, basis, rho, times, min_weight=0.99)
    for i, t in enumerate(times):
        dense = reservoir_state(bath, params, basis, rho, t, min_weight=0.99).occupations
        np.testing.assert_allclose(occ[i], dense, atol=1e-12)


def test_excitation_bookkeeping():
    # qubit excitation plus boson number is conserved
    bath = DiscretizedBath([0.9, 1.1], [0.1, 0.2])
    params = ModelParams(1.0)
    basis = SectorBasis(2, 2)
    times = np.linspace(0, 20, 21)
    c = map_coefficients(bath, params, basis, times)
    occ = mode_occupations(bath, params, basis, np.diag([1.0, 0.0]), times)
    np.testing.assert_allclose(c.xi + occ.sum(axis=1), 1.0, atol=1e-12)
