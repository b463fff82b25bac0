import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rwaqubit.bath import ModelParams
from rwaqubit.dynmap import populations
from rwaqubit.gkls import rates_from_map
from rwaqubit.thermo import (asymptotic_populations, cbar_and_D, cnumber_ratios, equilibrium_report,
                             reservoir_return, tail_slice, van_hove_collapse)


def test_asymptotic_population_examples():
    pe, pg = asymptotic_populations(ModelParams(1.0, 1e-12))
    assert pe == pytest.approx(0.5, abs=1e-12)
    assert asymptotic_populations(ModelParams(1.0, math.log(3.0))) == pytest.approx((0.25, 0.75), abs=1e-15)
    assert asymptotic_populations(ModelParams(1.0, 1e4)) == (0.0, 1.0)
    with pytest.raises(ValueError):
        asymptotic_populations(ModelParams(1.0))


@given(st.floats(1e-3, 50.0))
def test_asymptotic_populations_sum_to_one(bo):
    pe, pg = asymptotic_populations(ModelParams(1.0, bo))
    assert pe + pg == pytest.approx(1.0, abs=1e-15) and 0 <= pe <= 0.5


def test_cbar_without_dissipation():
    t = np.linspace(0, 5, 11)
    inv, D = cbar_and_D(t, np.zeros(11), 1.0)
    np.testing.assert_array_equal(inv, 0.0)
    np.testing.assert_array_equal(D, 1.0)


def test_cbar_long_time_limit():
    t = np.linspace(0, 400, 4001)
    n = 0.5
    inv, D = cbar_and_D(t, np.full_like(t, 0.2), n)
    assert inv[-1] == pytest.approx(1 / (2 * n + 1), rel=1e-12)
    assert np.all((D > 0) & (D <= 1))


def test_cbar_rejects_gaps():
    with pytest.raises(ValueError, match="grid index 2"):
        cbar_and_D([0, 1, 2], [0.0, 0.1, np.nan], 1.0)


def test_ratio_limits():
    from rwaqubit.exact import MapCoefficients

    c = MapCoefficients.from_arrays(np.arange(8.0), np.full(8, 2 / 3), np.full(8, 1 / 3), np.full(8, 1 / 3),
                                    np.full(8, 2 / 3), np.zeros(8))
    r = cnumber_ratios(c, ModelParams(1.0, math.log(2.0)))
    assert (r.lower_limit, r.upper_limit) == pytest.approx((0.5, 2.0))
    assert (r.lower_median, r.upper_median) == pytest.approx((0.5, 2.0))
    r3 = cnumber_ratios(c, ModelParams(1.0, math.log(3.0)))
    assert (r3.lower_limit, r3.upper_limit) == pytest.approx((1 / 3, 3.0))


def test_tail_is_last_quartile():
    s = tail_slice(100)
    assert (s.start, s.stop) == (75, 100)
    with pytest.raises(ValueError):
        tail_slice(3)


def test_collapse_of_identical_and_static_runs():
    t = np.linspace(0, 10, 101)
    p = 0.5 + 0.3 * np.exp(-t)
    assert van_hove_collapse(t, p, 0.4, t, p, 0.4) == 0.0
    assert van_hove_collapse(t, np.ones(101), 0.0, t, np.ones(101), 0.0) == 0.0


def test_collapse_of_exact_scaling_law():
    # p depends on lambda^2 t only: the half-coupling run needs four times the duration
    ta, tb = np.linspace(0, 10, 201), np.linspace(0, 40, 801)
    law = lambda s: 1 / 3 + 2 / 3 * np.exp(-3 * s)
    err = van_hove_collapse(ta, law(0.25 * ta), 0.5, tb, law(0.0625 * tb), 0.25)
    assert err < 1e-3


def test_reservoir_return_detection():
    t = np.linspace(0, 10, 1001)
    bump = 0.2 * t * np.exp(-t)
    occ = np.stack([1.0 + bump, 0.5 + 0.5 * bump], axis=1)
    D = np.exp(-0.05 * t)
    rr = reservoir_return(t, occ, D)
    assert rr.peak_time == pytest.approx(1.0, abs=0.01)
    assert rr.peak == pytest.approx(0.2 / math.e, rel=1e-4)
    # t e^{1-t} = 0.1 first holds near t = 4.88
    assert rr.return_time == pytest.approx(4.88, abs=0.02)
    assert rr.D_at_return == pytest.approx(math.exp(-0.05 * rr.return_time))


def test_report_fields_on_small_run(small_thermal):
    bath, params, basis, c = small_thermal
    g = rates_from_map(c)
    rep = equilibrium_report(c, g, params, populations(c, (1.0, 0.0))[:, 0])
    assert rep.n == pytest.approx(1.0)
    assert rep.balance_target == pytest.approx(2.0)
    assert rep.D_max_increase < 1e-6
    assert 0 < rep.p_excited_tail < 1
    assert set(rep.as_dict()) >= {"p_excited_tail", "balance_ratio_tail", "D_closed_form_error"}
