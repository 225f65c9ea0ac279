import math

import numpy as np
import pytest

from dnpnv import (DegenerateSteadyStateError, DensityOperator, NucleusSite,
                   NvRates, dipolar_tensor, evolve, joint_lindblad,
                   level_energies_mhz, nuclear_polarizations, nv_liouvillian,
                   nv_model, nv_populations, partial_trace,
                   spherical_position, steady_state)
from dnpnv.liouville import MAX_JOINT_DIM
from dnpnv.units import mhz_to_angular

from conftest import model_at


def test_nv_rates_validation():
    with pytest.raises(ValueError):
        NvRates(radiative_mhz=-1.0)


def test_level_energies_match_detunings():
    model = model_at(101.3)
    e = dict(zip(model.labels, level_energies_mhz(model)))
    assert e["0g"] == 0.0
    # below the crossing the -1 levels still sit above the 0 levels by
    # exactly the detuning
    assert e["-1g"] - e["0g"] == pytest.approx(model.detuning_mhz)
    assert e["-1e"] - e["0e"] == pytest.approx(model.excited_detuning_mhz)


def test_bare_steady_state_pumped_pair():
    # populations confined to the pumped 0g <-> 0e unit
    for r in (0.1, 0.4, 2.0):
        model = model_at(102.0, rate_mhz=r)
        rho = steady_state(nv_liouvillian(model))
        pops = {lab: rho.population(lab) for lab in model.labels}
        assert pops["0g"] == pytest.approx(model.p_ground, abs=1e-9)
        assert pops["0e"] == pytest.approx(model.p_excited, abs=1e-9)
        assert abs(pops["-1g"]) < 1e-9 and abs(pops["-1e"]) < 1e-9
        assert abs(pops["S"]) < 1e-9


def test_generator_is_trace_free():
    model = model_at(103.0)
    op = nv_liouvillian(model)
    dim = op.dim
    one = np.eye(dim, dtype=complex).reshape(-1)
    rng = np.random.default_rng(2)
    for _ in range(20):
        x = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        y = op.matrix @ x.reshape(-1)
        # trace of the generator output vanishes relative to its size;
        # the fast optical rates set the cancellation scale
        assert abs(one @ y) < 1e-10 * np.linalg.norm(y)


def test_steady_state_is_stationary_and_physical():
    model = model_at(100.5)
    site = NucleusSite.first_shell()
    op = joint_lindblad(model, [site])
    rho = steady_state(op)
    assert np.linalg.norm(op.apply(rho.matrix)) < 1e-8
    assert abs(np.trace(rho.matrix) - 1.0) < 1e-10
    assert np.linalg.norm(rho.matrix - rho.matrix.conj().T) < 1e-10
    assert np.linalg.eigvalsh(rho.matrix).min() > -1e-9


def test_steady_state_degenerate_without_pump():
    model = model_at(102.0, omega_r_mhz=0.0, rate_mhz=None)
    with pytest.raises(DegenerateSteadyStateError):
        steady_state(nv_liouvillian(model))


def test_evolve_preserves_trace_hermiticity_positivity():
    model = model_at(100.07, rate_mhz=0.4)
    site = NucleusSite.first_shell()
    op = joint_lindblad(model, [site], include_excited_hfi=False)
    nv0 = np.zeros((5, 5), complex)
    nv0[model.index("0g"), model.index("0g")] = 1.0
    rho0 = DensityOperator(np.kron(nv0, np.eye(2) / 2), labels=op.labels)
    t = np.linspace(0.0, 5.0, 120)
    for rho in evolve(op, rho0, t):
        m = rho.matrix
        assert abs(np.trace(m) - 1.0) < 1e-9
        assert np.linalg.norm(m - m.conj().T) < 1e-9
        assert np.linalg.eigvalsh(m).min() > -1e-9


def test_evolve_l_zero_is_constant():
    op = nv_liouvillian(model_at(102.0))
    op_zero = type(op)(matrix=np.zeros_like(op.matrix), dim=op.dim,
                       labels=op.labels)
    rng = np.random.default_rng(0)
    x = rng.normal(size=(5, 5))
    rho0 = x @ x.T
    rho0 = rho0 / np.trace(rho0)
    for rho in evolve(op_zero, rho0, np.linspace(0, 3, 7)):
        assert np.allclose(rho.matrix, rho0, atol=1e-14)


def test_evolve_converges_to_steady_state():
    # on the first-shell flip-flop resonance the slowest mode relaxes
    # in about a microsecond, so 60 us is deep in the stationary regime
    model = model_at(100.07, rate_mhz=0.4)
    site = NucleusSite.first_shell()
    op = joint_lindblad(model, [site], include_excited_hfi=False)
    target = steady_state(op).matrix
    nv0 = np.zeros((5, 5), complex)
    nv0[model.index("0g"), model.index("0g")] = 1.0
    rho0 = np.kron(nv0, np.eye(2) / 2)
    rho_t = evolve(op, rho0, np.linspace(0.0, 60.0, 31))[-1]
    assert np.linalg.norm(rho_t.matrix - target) < 1e-6


def test_zero_tensor_site_nuclear_populations_constant():
    from dnpnv import HfiTensor
    model = model_at(102.0)
    base = NucleusSite.first_shell()
    site = base.with_tensors(HfiTensor.zero(), HfiTensor.zero())
    op = joint_lindblad(model, [site])
    nv0 = np.zeros((5, 5), complex)
    nv0[model.index("0g"), model.index("0g")] = 1.0
    nuc0 = np.array([[0.7, 0.1], [0.1, 0.3]], complex)
    rho0 = DensityOperator(np.kron(nv0, nuc0), labels=op.labels)
    for rho in evolve(op, rho0, np.linspace(0, 2, 5)):
        nuc = partial_trace(rho.matrix, [5, 2], 1)
        assert np.allclose(np.diag(nuc), np.diag(nuc0), atol=1e-10)


def test_joint_dimension_cap():
    model = model_at(102.0)
    sites = [NucleusSite.dipolar(spherical_position(6.0 + k, 0.5, 0.0))
             for k in range(3)]
    assert 5 * 2**3 > MAX_JOINT_DIM
    with pytest.raises(ValueError):
        joint_lindblad(model, sites)


def test_partial_trace_product_state():
    rng = np.random.default_rng(4)
    a = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    a = a @ a.conj().T
    a /= np.trace(a)
    b = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    b = b @ b.conj().T
    b /= np.trace(b)
    joint = np.kron(a, b)
    assert np.allclose(partial_trace(joint, [5, 2], 0), a, atol=1e-12)
    assert np.allclose(partial_trace(joint, [5, 2], 1), b, atol=1e-12)


def test_nuclear_polarizations_and_populations():
    model = model_at(102.0)
    site = NucleusSite.first_shell()
    op = joint_lindblad(model, [site])
    nv0 = np.zeros((5, 5), complex)
    nv0[model.index("0g"), model.index("0g")] = 1.0
    nuc = np.diag([0.9, 0.1]).astype(complex)  # m order +1/2, -1/2
    rho = DensityOperator(np.kron(nv0, nuc), labels=op.labels)
    p = nuclear_polarizations(rho, model, [site])
    # <I_z>/I with populations 0.9 at m=+1/2 and 0.1 at -1/2
    assert p[0] == pytest.approx(0.8, abs=1e-12)
    pops = nv_populations(rho, model, [site])
    assert pops["0g"] == pytest.approx(1.0, abs=1e-12)
    assert sum(pops.values()) == pytest.approx(1.0, abs=1e-12)


def test_nuclear_zeeman_term_in_joint_hamiltonian():
    # with all tensors zero the nucleus precesses at gamma_n B
    from dnpnv import HfiTensor
    model = model_at(102.0)
    base = NucleusSite.first_shell()
    site = base.with_tensors(HfiTensor.zero(), HfiTensor.zero())
    op = joint_lindblad(model, [site])
    nv0 = np.zeros((5, 5), complex)
    nv0[model.index("0g"), model.index("0g")] = 1.0
    nuc0 = np.array([[0.5, 0.5], [0.5, 0.5]], complex)  # +x state
    rho0 = DensityOperator(np.kron(nv0, nuc0), labels=op.labels)
    f_n = abs(site.gamma_n_mhz_per_t * model.b_mt * 1e-3)
    t_half = 0.5 / f_n  # half a Larmor period in us
    rho = evolve(op, rho0, np.array([0.0, t_half]))[-1]
    nuc = partial_trace(rho.matrix, [5, 2], 1)
    assert nuc[0, 1].real == pytest.approx(-0.5, abs=1e-6)
