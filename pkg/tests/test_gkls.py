import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import expm

from rwaqubit.dynmap import apply_map, basis_states, trace_distance
from rwaqubit.exact import MapCoefficients
from rwaqubit.gkls import (GridTooCoarse, SolverFailure, derivative, integrate_gkls, liouvillian,
                           rates_from_map, stationarity_report)

from conftest import JC_G


def _constant_map(n=50):
    t = np.linspace(0, 10, n)
    one, zero = np.ones(n), np.zeros(n)
    return MapCoefficients.from_arrays(t, one, one, zero, zero, one)


def test_derivative_is_fourth_order():
    errs = []
    for n in (41, 81):
        t = np.linspace(0, 2, n)
        errs.append(np.max(np.abs(derivative(np.sin(3 * t), t[1]) - 3 * np.cos(3 * t))))
    assert errs[0] / errs[1] > 12


def test_no_coupling_no_rates():
    g = rates_from_map(_constant_map())
    for r in (g.gamma_plus, g.gamma_minus, g.gamma_z, g.G):
        np.testing.assert_array_equal(r, 0.0)
    out = integrate_gkls(g, "plus")
    np.testing.assert_allclose(out, np.repeat(basis_states()[2][None], 50, axis=0), atol=0)


def test_jc_rates(jc):
    _, _, c = jc
    g = rates_from_map(c)
    gt = JC_G * c.t
    ok = g.valid & (np.abs(c.D) > 1e-3)
    assert np.max(np.abs(g.gamma_plus[ok])) < 1e-8
    assert np.max(np.abs(g.gamma_z[ok])) < 1e-6
    assert np.max(np.abs(g.G[ok])) < 1e-6
    expected = 2 * JC_G * np.tan(gt[ok])
    assert np.max(np.abs(g.gamma_minus[ok] - expected) / np.abs(expected).clip(1e-3)) < 0.01


def test_jc_integration_recovers_excited_population(jc):
    _, _, c = jc
    g = rates_from_map(c)
    n = g.leading_window(1e-3)
    out = integrate_gkls(g, "excited", c.t[:n])
    assert c.t[n - 1] * JC_G < math.pi / 2
    np.testing.assert_allclose(out[:, 0, 0].real, np.cos(JC_G * c.t[:n]) ** 2, atol=1e-5)


def test_eta_zero_is_masked(jc):
    _, _, c = jc
    g = rates_from_map(c)
    crossing = np.argmin(np.abs(np.cos(JC_G * c.t)))
    assert not g.valid[crossing]
    assert math.isnan(g.gamma_minus[crossing])


@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.floats(-1, 1))
def test_liouvillian_matches_component_equations(gp, gm, gz, G):
    L = liouvillian(gp, gm, gz, G)
    rho = np.array([[0.3, 0.2 - 0.1j], [0.2 + 0.1j, 0.7]])
    d = (L @ rho.reshape(-1)).reshape(2, 2)
    p, coh = rho[0, 0].real, rho[0, 1]
    assert d[0, 0] == pytest.approx(-gm * p + gp * (1 - p), abs=1e-14)
    assert d[0, 1] == pytest.approx(-(2j * G + 2 * gz + 0.5 * (gp + gm)) * coh, abs=1e-14)
    # trace preservation: the trace row of L vanishes
    assert abs(d[0, 0] + d[1, 1]) < 1e-15


@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.floats(-1, 1), st.floats(0, 5))
def test_constant_generator_gives_valid_states(gp, gm, gz, G, t):
    rho = (expm(liouvillian(gp, gm, gz, G) * t) @ basis_states()[3].reshape(-1)).reshape(2, 2)
    assert abs(np.trace(rho) - 1) < 1e-12
    assert np.min(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))) > -1e-12


def test_rate_identities_pointwise(small_thermal):
    *_, c = small_thermal
    g = rates_from_map(c)
    v = g.valid
    assert np.all(np.isfinite(g.gamma_plus[v])) and np.all(np.isfinite(g.F[v]))
    np.testing.assert_array_equal(g.gamma_z[v], g.F[v].real)
    np.testing.assert_array_equal(g.G[v], -g.F[v].imag)


def test_closure_on_thermal_window(small_thermal):
    *_, c = small_thermal
    g = rates_from_map(c)
    n = g.leading_window(0.01)
    assert n > 20
    for rho in basis_states():
        err = trace_distance(integrate_gkls(g, rho, c.t[:n]), apply_map(c, rho)[:n])
        assert np.max(err) < 1e-6


def test_self_test_catches_coarse_grid(jc):
    _, _, c = jc
    sparse = MapCoefficients.from_arrays(c.t[::40], c.alpha[::40], c.xi[::40], c.gamma[::40],
                                         c.zeta[::40], c.eta[::40])
    with pytest.raises(GridTooCoarse):
        rates_from_map(sparse)
    assert rates_from_map(sparse, self_test=False).self_test > 0.01
    assert rates_from_map(c).self_test < 0.01


def test_grid_must_stay_in_window(jc):
    _, _, c = jc
    g = rates_from_map(c)
    with pytest.raises(ValueError):
        integrate_gkls(g, "excited", c.t)
    short = rates_from_map(MapCoefficients.from_arrays(c.t[:12], c.alpha[:12], c.xi[:12], c.gamma[:12],
                                                       c.zeta[:12], np.where(np.arange(12) > 2, 0, c.eta[:12])),
                           self_test=False)
    with pytest.raises(SolverFailure):
        integrate_gkls(short, "excited")


def test_detailed_balance_fixed_point():
    # synthetic rates in detailed balance at beta Omega = ln 3
    n = 40
    t = np.linspace(0, 4, n)
    gp = np.full(n, 0.1)
    from rwaqubit.gkls import GklsCoefficients

    g = GklsCoefficients(t, gp, 3 * gp, np.zeros(n, complex), np.ones(n, bool), np.ones(n))
    rep = stationarity_report(g)
    assert rep.fixed_point == pytest.approx(0.25, abs=1e-15)
    assert rep.drift == 0.0
