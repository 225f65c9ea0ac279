"""Shared fixtures and helpers for the test suite."""

import numpy as np
import pytest

from dnpnv import HfiTensor, NucleusSite, nv_model
from dnpnv.liouville import superoperator_matrix

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Echo the acceptance-criteria verdicts after the test summary."""
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def first_shell():
    return NucleusSite.first_shell()


def scale_transverse(site: NucleusSite, eta: float) -> NucleusSite:
    """Divide the transverse diagonal couplings by eta, zero A_xz/A_zx.

    Keeps A_zz invariant, so the resonance fields stay put while the flip
    rates drop by eta^2.  Applied to the ground tensor only.
    """
    g = site.ground_tensor.matrix.copy()
    g[0, 0] /= eta
    g[1, 1] /= eta
    g[0, 2] = g[2, 0] = 0.0
    return site.with_tensors(HfiTensor(g), site.excited_tensor)


def model_at(b_mt: float, rate_mhz: float = 0.4, levels: str = "five",
             **kw):
    return nv_model(b_mt, rate_mhz=rate_mhz, levels=levels, **kw)


def toy_three_level():
    """A tame 3-level dissipative generator with a unique steady state.

    Levels 0 (ground), 1 (bystander), 2 (excited): incoherent pump
    0 -> 2, decay 2 -> 0 and 1 -> 0, pure dephasing on level 1, and a
    level-1 energy in the Hamiltonian.  All scales are order unity in
    rad/us, so the propagator is integrable on a time grid, unlike the
    production model whose orbital rate makes it stiff.
    """
    k, pump, gph, g1 = 1.3, 0.35, 0.21, 0.5
    h = np.diag([0.0, 2.4, 0.0]).astype(complex)
    c_ops = [
        np.sqrt(k) * np.array([[0, 0, 1], [0, 0, 0], [0, 0, 0]], complex),
        np.sqrt(pump) * np.array([[0, 0, 0], [0, 0, 0], [1, 0, 0]],
                                 complex),
        np.sqrt(gph) * np.diag([0.0, 1.0, 0.0]).astype(complex),
        np.sqrt(g1) * np.array([[0, 1, 0], [0, 0, 0], [0, 0, 0]], complex),
    ]
    return superoperator_matrix(h, c_ops)


def toy_probe():
    """Non-Hermitian probe operator coupling 0 -> 1 and 2 -> 1."""
    return np.array([[0, 0, 0], [0.7, 0, 0.4], [0, 0, 0]], complex)
