import math

import numpy as np
import pytest

from dnpnv import (DnpResult, FrozenSpinError, NucleusSite,
                   PolarizationState, dnp_steady, markovian_validity,
                   polarization_trajectory, pss_dipolar,
                   rate_equation_steady, strong_hfi_check)
from dnpnv.rates import correlation_time, rate_pair, rate_pair_spin_half
from dnpnv.singlespin import GAMMA_DEP_DEFAULT_PER_S, flip_strength_spin
from dnpnv.units import per_s_to_per_us

from conftest import model_at


def test_spin_half_steady_state_identity():
    rng = np.random.default_rng(3)
    for _ in range(20):
        wu, wd = rng.uniform(0.01, 5.0, size=2)
        state = rate_equation_steady([wu], [wd])
        assert state.polarization == pytest.approx((wu - wd) / (wu + wd),
                                                   rel=1e-12)


def test_depolarization_reduction_factor():
    wu, wd = 3.0, 1.0
    w = wu + wd
    p0 = rate_equation_steady([wu], [wd]).polarization
    for gdep_per_s in (1.0, 40.0, 2e5):
        g = per_s_to_per_us(gdep_per_s)
        p = rate_equation_steady([wu], [wd],
                                 gamma_dep_per_s=gdep_per_s).polarization
        assert p == pytest.approx(p0 * w / (w + 2.0 * g), rel=1e-12)


def test_spin_one_detailed_balance_products():
    w_up = [2.0, 0.5]
    w_down = [1.0, 4.0]
    state = rate_equation_steady(w_up, w_down, spin=1.0)
    weights = np.array([1.0, 2.0 / 1.0, (2.0 / 1.0) * (0.5 / 4.0)])
    expected = weights / weights.sum()
    assert np.allclose(state.populations, expected, atol=1e-14)
    assert state.polarization == pytest.approx(
        float((np.array([-1.0, 0.0, 1.0]) @ expected)), rel=1e-12)


def test_absorbing_link_polarizes_fully():
    state = rate_equation_steady([2.0], [0.0])
    assert np.allclose(state.populations, [0.0, 1.0], atol=1e-15)
    assert state.polarization == 1.0
    state = rate_equation_steady([0.0], [2.0])
    assert state.polarization == -1.0


def test_frozen_spin_errors():
    with pytest.raises(FrozenSpinError):
        rate_equation_steady([0.0, 1.0], [0.0, 1.0], spin=1.0)
    # the upper level is absorbing but unreachable across the dead link
    with pytest.raises(FrozenSpinError):
        rate_equation_steady([0.0, 5.0], [3.0, 0.0], spin=1.0)


def test_rate_equation_validation():
    with pytest.raises(ValueError):
        rate_equation_steady([1.0, 2.0], [1.0], spin=1.0)
    with pytest.raises(ValueError):
        rate_equation_steady([-1.0], [1.0])
    with pytest.raises(ValueError):
        rate_equation_steady([1.0], [1.0], gamma_dep_per_s=-4.0)


def test_polarization_state_validation_and_properties():
    state = PolarizationState(populations=[0.25, 0.75])
    assert np.allclose(state.projections, [-0.5, 0.5])
    assert state.polarization == pytest.approx(0.5)
    assert not state.populations.flags.writeable
    with pytest.raises(ValueError):
        PolarizationState(populations=[0.5, 0.25, 0.25])
    with pytest.raises(ValueError):
        PolarizationState(populations=[1.2, -0.2])
    with pytest.raises(ValueError):
        PolarizationState(populations=[0.3, 0.3])


def test_polarization_trajectory_formula():
    t = np.linspace(0.0, 5.0, 11)
    p = polarization_trajectory(0.1, 0.9, 0.7, t)
    assert np.allclose(p, 0.9 + (0.1 - 0.9) * np.exp(-0.7 * t), atol=1e-15)
    assert polarization_trajectory(0.0, 1.0, 2.0, 0.0) == 0.0
    assert isinstance(polarization_trajectory(0.0, 1.0, 2.0, 1.0), float)
    with pytest.raises(ValueError):
        polarization_trajectory(0.0, 1.0, -0.1, t)


def test_pss_dipolar_values():
    assert pss_dipolar(0.0) == pytest.approx(1.0, abs=1e-15)
    # c = 0 at cos^2 theta = 2/3
    assert pss_dipolar(math.acos(math.sqrt(2.0 / 3.0))) == pytest.approx(
        0.0, abs=1e-14)
    assert pss_dipolar(math.pi / 2.0) == pytest.approx(-0.8, abs=1e-15)


def test_pss_dipolar_odd_symmetry():
    # p(c) = -p(-c) wherever both signs of c = 3cos^2(theta) - 2 occur
    theta_of = lambda c: math.acos(math.sqrt((c + 2.0) / 3.0))
    for c in np.linspace(0.0, 1.0, 21):
        assert pss_dipolar(theta_of(c)) == pytest.approx(
            -pss_dipolar(theta_of(-c)), abs=1e-14)


def test_strong_hfi_check():
    # 20 A dipolar coupling beats 1/s depolarization, 40 A does not
    a20 = 20.0 / 20.0 ** 3
    a40 = 20.0 / 40.0 ** 3
    assert strong_hfi_check(a20, 0.2, 1.0)
    assert not strong_hfi_check(a40, 0.2, 1.0)
    assert strong_hfi_check(a40, 0.2, 0.0)
    with pytest.raises(ValueError):
        strong_hfi_check(-1.0, 0.2, 1.0)


def test_markovian_validity_gate():
    model = model_at(102.0, rate_mhz=0.4)
    assert markovian_validity(0.0, model) == (True, 0.0)
    tau = correlation_time(model)
    valid, ratio = markovian_validity(0.05 / tau, model)
    assert valid and ratio == pytest.approx(0.05, rel=1e-12)
    valid, ratio = markovian_validity(0.5 / tau, model)
    assert not valid and ratio == pytest.approx(0.5, rel=1e-12)
    with pytest.raises(ValueError):
        markovian_validity(-1.0, model)


def test_dnp_steady_wiring():
    model = model_at(102.37, rate_mhz=0.1)
    site = NucleusSite.first_shell()
    pair = rate_pair(model, site, method="resolvent")
    gdep = 2.0
    t = np.linspace(0.0, 3.0, 7)
    res = dnp_steady(pair, model, gamma_dep_per_s=gdep, t_us=t, p0=0.0)
    g = per_s_to_per_us(gdep)
    expect_p = (pair.w_plus - pair.w_minus) / (pair.total + 2.0 * g)
    assert res.p_ss == pytest.approx(expect_p, rel=1e-12)
    assert res.w == pair.total
    assert res.relaxation_rate == pytest.approx(pair.total + 2.0 * g)
    assert np.allclose(
        res.p_t, polarization_trajectory(0.0, res.p_ss,
                                         res.relaxation_rate, t))
    valid, ratio = markovian_validity(pair.total, model)
    assert res.markovian_valid == valid
    assert res.markovian_ratio == ratio
    # without a grid no trajectory is attached and the default gamma holds
    bare = dnp_steady(pair, model)
    assert bare.t_us is None and bare.p_t is None
    assert bare.gamma_dep_per_s == GAMMA_DEP_DEFAULT_PER_S


def test_flip_strength_spin_endpoints():
    assert flip_strength_spin(0.5, -0.5, +1) == 1.0
    assert flip_strength_spin(0.5, +0.5, +1) == 0.0
    assert flip_strength_spin(1.0, 0.0, +1) == 2.0
