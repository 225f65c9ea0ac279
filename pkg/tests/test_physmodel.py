import json
import math

import numpy as np
import pytest

from dnpnv import (DEFAULT_CONSTANTS, HfiTensor, LatticeError, NucleusSite,
                   delta_n, detuning, dipolar_tensor, energy_mismatch,
                   export_sites, import_sites, lattice_positions,
                   sample_lattice, spherical_position)


def test_hfi_tensor_validation():
    with pytest.raises(ValueError):
        HfiTensor(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        HfiTensor(np.full((3, 3), np.nan))
    t = HfiTensor(np.eye(3))
    with pytest.raises(ValueError):
        t.matrix[0, 0] = 5.0


def test_spherical_components_of_random_tensors():
    rng = np.random.default_rng(3)
    for _ in range(20):
        m = rng.normal(size=(3, 3))
        t = HfiTensor(m)
        assert t.a_zz == m[2, 2]
        assert t.a_plus_minus == pytest.approx(
            complex(m[0, 0] + m[1, 1], m[1, 0] - m[0, 1]))
        assert t.a_plus_plus == pytest.approx(
            complex(m[0, 0] - m[1, 1], m[0, 1] + m[1, 0]))
        assert t.a_z_plus == pytest.approx(complex(m[2, 0], m[2, 1]))
        assert t.a_minus_plus == pytest.approx(t.a_plus_minus.conjugate())
        assert t.a_minus_minus == pytest.approx(t.a_plus_plus.conjugate())


def test_dipolar_closed_forms():
    # A = A_dp (3 n n^T - 1) gives, with d = A_dp(r):
    #   a_zz = d (3 cos^2 t - 1), a_pm = d (3 sin^2 t - 2),
    #   a_pp = 3 d sin^2 t e^{2 i phi}, a_z_plus = 3 d sin t cos t e^{i phi}
    rng = np.random.default_rng(11)
    for _ in range(30):
        r = rng.uniform(2.0, 30.0)
        th = rng.uniform(0.0, math.pi)
        ph = rng.uniform(0.0, 2.0 * math.pi)
        t = dipolar_tensor(spherical_position(r, th, ph))
        d = DEFAULT_CONSTANTS.dipolar_mhz_a3 / r**3
        st, ct = math.sin(th), math.cos(th)
        assert abs(t.a_zz - d * (3 * ct * ct - 1)) < 1e-12 * d * 3
        assert abs(t.a_plus_minus - d * (3 * st * st - 2)) < 1e-11 * d * 3
        assert abs(t.a_plus_plus
                   - 3 * d * st * st * np.exp(2j * ph)) < 1e-11 * d * 3
        assert abs(t.a_z_plus
                   - 3 * d * st * ct * np.exp(1j * ph)) < 1e-11 * d * 3


def test_dipolar_rejects_tiny_radius():
    with pytest.raises(ValueError):
        dipolar_tensor(np.array([0.0, 0.0, 0.3]))


def test_detuning_zero_at_gslac():
    b0 = DEFAULT_CONSTANTS.gslac_mt
    assert abs(detuning(b0)) < 1e-10
    assert detuning(b0 - 1.0) == pytest.approx(
        DEFAULT_CONSTANTS.gamma_e_mhz_per_mt)
    assert detuning(b0, shift_mhz=3.0) == pytest.approx(3.0)
    with pytest.raises(ValueError):
        detuning(-1.0)


def test_delta_n_and_mismatch_relation():
    # the two spin-1/2 flip mismatches sit at Delta +- Delta_N / 2
    rng = np.random.default_rng(5)
    for _ in range(20):
        b = rng.uniform(95.0, 110.0)
        a_zz = rng.uniform(-150.0, 150.0)
        dn = delta_n(b, a_zz)
        d = detuning(b)
        up = energy_mismatch(-0.5, +1, b, a_zz)
        dn_flip = energy_mismatch(+0.5, -1, b, a_zz)
        assert up == pytest.approx(d + dn / 2.0, abs=1e-12)
        assert dn_flip == pytest.approx(d - dn / 2.0, abs=1e-12)
    with pytest.raises(ValueError):
        energy_mismatch(-0.5, 0, 102.0, 1.0)


def test_first_shell_tensors():
    site = NucleusSite.first_shell()
    g = site.ground_tensor.matrix
    e = site.excited_tensor.matrix
    assert g[0, 0] == 198.6 and g[1, 1] == 123.0 and g[2, 2] == 129.0
    assert g[0, 2] == g[2, 0] == -21.5
    assert e[0, 0] == 103.2 and e[1, 1] == 56.7 and e[2, 2] == 79.5
    assert e[0, 2] == e[2, 0] == -32.6
    assert site.spin == 0.5 and site.multiplicity == 2
    assert site.gamma_n_mhz_per_t == -10.705


def test_site_geometry_properties():
    site = NucleusSite.dipolar(spherical_position(12.0, 0.7, 1.1))
    assert site.r == pytest.approx(12.0)
    assert site.theta == pytest.approx(0.7)


def test_lattice_positions_geometry():
    pos = lattice_positions(1.0, 8.0)
    r = np.linalg.norm(pos, axis=1)
    assert np.all((r >= 1.0) & (r <= 8.0))
    # nearest-neighbor distance in diamond is a sqrt(3)/4
    d_nn = DEFAULT_CONSTANTS.lattice_a * math.sqrt(3.0) / 4.0
    from scipy.spatial.distance import pdist
    assert pdist(pos).min() == pytest.approx(d_nn, rel=1e-9)
    # density: diamond has 8 atoms per cell of volume a^3
    vol = 4.0 / 3.0 * math.pi * (8.0**3 - 1.0**3)
    expected = 8.0 / DEFAULT_CONSTANTS.lattice_a**3 * vol
    assert abs(len(pos) - expected) / expected < 0.10
    # deterministic ordering
    assert np.array_equal(pos, lattice_positions(1.0, 8.0))
    with pytest.raises(ValueError):
        lattice_positions(5.0, 2.0)


def test_sample_lattice_determinism_and_abundance():
    a = sample_lattice(42, 3.0, 20.0)
    b = sample_lattice(42, 3.0, 20.0)
    assert len(a) == len(b)
    for s1, s2 in zip(a, b):
        assert np.array_equal(s1.position_a, s2.position_a)
    assert sample_lattice(42, 3.0, 20.0, abundance=0.0) == []
    # occupation fraction over many seeds approaches the abundance
    n_all = len(lattice_positions(3.0, 20.0))
    counts = [len(sample_lattice(s, 3.0, 20.0)) for s in range(40)]
    assert np.mean(counts) / n_all == pytest.approx(0.011, rel=0.15)
    with pytest.raises(LatticeError):
        sample_lattice(0, 0.6, 1.2)
    with pytest.raises(ValueError):
        sample_lattice(0, 3.0, 20.0, abundance=1.5)


def test_export_import_round_trip(tmp_path):
    sites = sample_lattice(7, 3.0, 12.0)
    path = tmp_path / "sites.json"
    export_sites(sites, path)
    back = import_sites(path)
    assert len(back) == len(sites)
    for s1, s2 in zip(sites, back):
        assert np.allclose(s1.position_a, s2.position_a)
        assert np.allclose(s1.ground_tensor.matrix, s2.ground_tensor.matrix)
        # stored schema carries one tensor; both manifolds get it back
        assert np.allclose(s2.ground_tensor.matrix,
                           s2.excited_tensor.matrix)
        assert s2.species == s1.species
    raw = json.loads(path.read_text())
    assert {"x_A", "y_A", "z_A", "species", "tensor_MHz"} <= set(raw[0])
