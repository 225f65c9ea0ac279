"""NV level structure, optical pumping, and Lindblad dynamics.

The optically pumped NV center is modeled on five levels {0g, -1g, 0e,
-1e, S} or seven levels {0g, -1g, +1g, 0e, -1e, +1e, S}: the ground and
excited orbital triplet spin levels plus one effective singlet shelf.  The
frame rotates at the laser frequency, so excited levels carry the laser
detuning and the optical drive is static with Rabi frequency Omega_R.

Builders return Hamiltonians in rad/us and jump operators in 1/sqrt(us);
superoperators act on row-major vectorized density matrices.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DegenerateSteadyStateError, NumericalError
from .physmodel import DEFAULT_CONSTANTS, NucleusSite, PhysConstants
from .units import mhz_to_angular

FIVE_LABELS = ("0g", "-1g", "0e", "-1e", "S")
SEVEN_LABELS = ("0g", "-1g", "+1g", "0e", "-1e", "+1e", "S")

# Electron spin projection of each optical level.
_LEVEL_M = {"0g": 0.0, "-1g": -1.0, "+1g": 1.0,
            "0e": 0.0, "-1e": -1.0, "+1e": 1.0}
_GROUND = ("0g", "-1g", "+1g")
_EXCITED = ("0e", "-1e", "+1e")


@dataclass(frozen=True)
class NvRates:
    """Optical-cycle decay rates in MHz (ordinary frequency).

    radiative_mhz: spin-conserving excited -> ground emission.
    isc_mhz: intersystem crossing from the m = +-1 excited levels to the
        singlet shelf.
    isc0_mhz: leakage from the m = 0 excited level to the shelf (idealized
        to zero by default).
    singlet_mhz: shelf decay into the m = 0 ground level.
    orbital_mhz: orbital dephasing of the excited manifold (common mode,
        does not touch spin coherences within one manifold).
    dephasing_mhz: pure dephasing between ground spin levels.
    """

    radiative_mhz: float = 13.0
    isc_mhz: float = 13.3
    isc0_mhz: float = 0.0
    singlet_mhz: float = 0.56
    orbital_mhz: float = 1.0e7
    dephasing_mhz: float = 0.001

    def __post_init__(self):
        for name in ("radiative_mhz", "isc_mhz", "isc0_mhz", "singlet_mhz",
                     "orbital_mhz", "dephasing_mhz"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and >= 0")

    @property
    def optical_halfwidth_mhz(self) -> float:
        """Half-width of the 0g <-> 0e coherence (MHz)."""
        return (self.radiative_mhz + self.orbital_mhz + self.dephasing_mhz
                + self.isc0_mhz) / 2.0


DEFAULT_RATES = NvRates()


@dataclass(frozen=True)
class PumpConfig:
    """Optical drive: Rabi frequency and laser detuning, MHz."""

    omega_r_mhz: float
    laser_detuning_mhz: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.omega_r_mhz) and self.omega_r_mhz >= 0):
            raise ValueError("omega_r_mhz must be finite and >= 0")
        if not np.isfinite(self.laser_detuning_mhz):
            raise ValueError("laser_detuning_mhz must be finite")

    def rate_mhz(self, rates: NvRates = DEFAULT_RATES) -> float:
        """Effective pump rate R = 2 pi (Omega_R/2)^2 L_G2(detuning), MHz.

        L_G2 is the unit-area Lorentzian of half-width
        optical_halfwidth_mhz; the formula is unit consistent in MHz.
        """
        g2 = rates.optical_halfwidth_mhz
        return (2.0 * (self.omega_r_mhz / 2.0) ** 2 * g2
                / (self.laser_detuning_mhz ** 2 + g2 ** 2))

    @classmethod
    def for_rate(cls, rate_mhz: float, rates: NvRates = DEFAULT_RATES,
                 laser_detuning_mhz: float = 0.0) -> "PumpConfig":
        """Rabi frequency that produces the requested pump rate."""
        if not (np.isfinite(rate_mhz) and rate_mhz >= 0):
            raise ValueError("rate_mhz must be finite and >= 0")
        g2 = rates.optical_halfwidth_mhz
        omega = math.sqrt(2.0 * rate_mhz * (laser_detuning_mhz ** 2 + g2 ** 2)
                          / g2)
        return cls(omega_r_mhz=omega, laser_detuning_mhz=laser_detuning_mhz)


@dataclass(frozen=True)
class NvModel:
    """Field point plus level set, decay rates, and pump settings.

    delta_shift_mhz statically offsets the ground 0/-1 splitting (e.g. the
    on-site nitrogen hyperfine shift for one nitrogen projection).
    """

    b_mt: float
    pump: PumpConfig
    levels: str = "seven"
    rates: NvRates = DEFAULT_RATES
    constants: PhysConstants = DEFAULT_CONSTANTS
    delta_shift_mhz: float = 0.0

    def __post_init__(self):
        if self.levels not in ("five", "seven"):
            raise ValueError("levels must be 'five' or 'seven'")
        if not (np.isfinite(self.b_mt) and self.b_mt > 0):
            raise ValueError("b_mt must be positive")
        if not np.isfinite(self.delta_shift_mhz):
            raise ValueError("delta_shift_mhz must be finite")

    @property
    def labels(self) -> tuple:
        return FIVE_LABELS if self.levels == "five" else SEVEN_LABELS

    @property
    def dim(self) -> int:
        return len(self.labels)

    @property
    def detuning_mhz(self) -> float:
        """Ground 0/-1 splitting Delta, including the static shift."""
        return (self.constants.d_gs_mhz
                - self.constants.gamma_e_mhz_per_mt * self.b_mt
                + self.delta_shift_mhz)

    @property
    def excited_detuning_mhz(self) -> float:
        """Excited 0/-1 splitting D_es - gamma_e B."""
        return (self.constants.d_es_mhz
                - self.constants.gamma_e_mhz_per_mt * self.b_mt)

    @property
    def pump_rate_mhz(self) -> float:
        return self.pump.rate_mhz(self.rates)

    @property
    def p_ground(self) -> float:
        """Steady conditional probability of being in the ground state.

        For the pumped two-level unit 0g <-> 0e with radiative return,
        P_g = (R + gamma) / (2R + gamma).
        """
        r = self.pump_rate_mhz
        g = self.rates.radiative_mhz
        return (r + g) / (2.0 * r + g)

    @property
    def p_excited(self) -> float:
        return 1.0 - self.p_ground

    def index(self, label: str) -> int:
        return self.labels.index(label)


def nv_model(b_mt: float, rate_mhz: float | None = None,
             omega_r_mhz: float | None = None, levels: str = "seven",
             laser_detuning_mhz: float = 0.0,
             rates: NvRates = DEFAULT_RATES,
             constants: PhysConstants = DEFAULT_CONSTANTS,
             delta_shift_mhz: float = 0.0) -> NvModel:
    """Convenience constructor taking either a pump rate or a Rabi frequency."""
    if (rate_mhz is None) == (omega_r_mhz is None):
        raise ValueError("give exactly one of rate_mhz or omega_r_mhz")
    if rate_mhz is not None:
        pump = PumpConfig.for_rate(rate_mhz, rates, laser_detuning_mhz)
    else:
        pump = PumpConfig(omega_r_mhz=omega_r_mhz,
                          laser_detuning_mhz=laser_detuning_mhz)
    return NvModel(b_mt=b_mt, pump=pump, levels=levels, rates=rates,
                   constants=constants, delta_shift_mhz=delta_shift_mhz)


def level_energies_mhz(model: NvModel) -> np.ndarray:
    """Rotating-frame energies of the model's levels, MHz."""
    c = model.constants
    zee = c.gamma_e_mhz_per_mt * model.b_mt
    dl = model.pump.laser_detuning_mhz
    e = {
        "0g": 0.0,
        "-1g": model.detuning_mhz,
        "+1g": c.d_gs_mhz + zee,
        "0e": dl,
        "-1e": c.d_es_mhz - zee + dl,
        "+1e": c.d_es_mhz + zee + dl,
        "S": 0.0,
    }
    return np.array([e[lab] for lab in model.labels])


def build_hamiltonian(model: NvModel) -> np.ndarray:
    """NV Hamiltonian in the rotating frame, rad/us."""
    labels = model.labels
    h = np.diag(level_energies_mhz(model)).astype(complex)
    half_rabi = model.pump.omega_r_mhz / 2.0
    for g, e in (("0g", "0e"), ("-1g", "-1e"), ("+1g", "+1e")):
        if g in labels and e in labels:
            i, j = labels.index(e), labels.index(g)
            h[i, j] += half_rabi
            h[j, i] += half_rabi
    return mhz_to_angular(h)


def build_collapse_ops(model: NvModel) -> list[np.ndarray]:
    """Jump operators (1/sqrt(us)) for the optical cycle and dephasing.

    Channels with zero rate are omitted; with all rates zero the list is
    empty and the generator is purely Hamiltonian.
    """
    labels = model.labels
    dim = model.dim
    rt = model.rates
    ops = []

    def sigma(to_label, from_label):
        m = np.zeros((dim, dim), dtype=complex)
        m[labels.index(to_label), labels.index(from_label)] = 1.0
        return m

    def amp(rate_mhz):
        return math.sqrt(mhz_to_angular(rate_mhz))

    if rt.radiative_mhz > 0:
        for g, e in (("0g", "0e"), ("-1g", "-1e"), ("+1g", "+1e")):
            if g in labels and e in labels:
                ops.append(amp(rt.radiative_mhz) * sigma(g, e))
    if rt.isc_mhz > 0:
        for e in ("-1e", "+1e"):
            if e in labels:
                ops.append(amp(rt.isc_mhz) * sigma("S", e))
    if rt.isc0_mhz > 0 and "0e" in labels:
        ops.append(amp(rt.isc0_mhz) * sigma("S", "0e"))
    if rt.singlet_mhz > 0 and "S" in labels:
        ops.append(amp(rt.singlet_mhz) * sigma("0g", "S"))
    if rt.orbital_mhz > 0:
        proj = np.zeros((dim, dim), dtype=complex)
        for e in _EXCITED:
            if e in labels:
                proj[labels.index(e), labels.index(e)] = 1.0
        ops.append(amp(rt.orbital_mhz) * proj)
    if rt.dephasing_mhz > 0:
        for g in _GROUND:
            if g in labels:
                ops.append(amp(rt.dephasing_mhz) * sigma(g, g))
    return ops


def manifold_spin_ops(labels: tuple) -> dict:
    """Electron spin operators restricted to each orbital manifold.

    Returns gz/gp/gm (ground S_z, S_+, S_-) and ez/ep/em (excited), plus
    the excited projector pe.  On the five-level set the +1 rows are
    absent and the operators are the natural truncations.
    """
    dim = len(labels)
    gz = np.zeros((dim, dim), dtype=complex)
    ez = np.zeros((dim, dim), dtype=complex)
    gp = np.zeros((dim, dim), dtype=complex)
    ep = np.zeros((dim, dim), dtype=complex)
    pe = np.zeros((dim, dim), dtype=complex)
    for lab in _GROUND:
        if lab in labels:
            gz[labels.index(lab), labels.index(lab)] = _LEVEL_M[lab]
    for lab in _EXCITED:
        if lab in labels:
            ez[labels.index(lab), labels.index(lab)] = _LEVEL_M[lab]
            pe[labels.index(lab), labels.index(lab)] = 1.0
    # S_+ raises m by one within a spin-1 manifold: <m+1|S_+|m> =
    # sqrt(2 - m(m+1)).
    for pairs, mat in ((("-1g", "0g"), gp), (("0g", "+1g"), gp),
                       (("-1e", "0e"), ep), (("0e", "+1e"), ep)):
        lo, hi = pairs
        if lo in labels and hi in labels:
            m = _LEVEL_M[lo]
            mat[labels.index(hi), labels.index(lo)] = math.sqrt(
                2.0 - m * (m + 1.0))
    return {"gz": gz, "gp": gp, "gm": gp.conj().T,
            "ez": ez, "ep": ep, "em": ep.conj().T, "pe": pe}


@dataclass(frozen=True)
class LiouvilleOperator:
    """Dense superoperator on row-major vectorized density matrices."""

    matrix: np.ndarray
    dim: int
    labels: tuple | None = None

    def __post_init__(self):
        m = np.asarray(self.matrix)
        if m.shape != (self.dim ** 2, self.dim ** 2):
            raise ValueError("superoperator shape must be (dim^2, dim^2)")
        object.__setattr__(self, "matrix", m)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        rho = np.asarray(rho, dtype=complex)
        return (self.matrix @ rho.reshape(-1)).reshape(self.dim, self.dim)


def superoperator_matrix(hamiltonian: np.ndarray,
                         collapse_ops: list[np.ndarray],
                         conditional: tuple | None = None,
                         labels: tuple | None = None) -> LiouvilleOperator:
    """Lindblad generator as a dense matrix, row-major vec convention.

    S vec(X) = vec(-i[H, X] + sum_k C_k X C_k^+ - {C_k^+ C_k, X}/2).

    conditional, if given, is (f_z, n, m): adds the off-diagonal sector
    shift -i (n F_z X - X m F_z) used by the conditional generators of the
    nuclear-flip rate theory (f_z in rad/us).
    """
    h = np.asarray(hamiltonian, dtype=complex)
    dim = h.shape[0]
    eye = np.eye(dim, dtype=complex)
    s = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for c in collapse_ops:
        c = np.asarray(c, dtype=complex)
        cdc = c.conj().T @ c
        s += np.kron(c, c.conj())
        s -= 0.5 * (np.kron(cdc, eye) + np.kron(eye, cdc.T))
    if conditional is not None:
        f_z, n, m = conditional
        f_z = np.asarray(f_z, dtype=complex)
        s += -1j * n * np.kron(f_z, eye) + 1j * m * np.kron(eye, f_z.T)
    return LiouvilleOperator(matrix=s, dim=dim, labels=labels)


def nv_liouvillian(model: NvModel) -> LiouvilleOperator:
    """Generator of the bare (nucleus-free) NV optical cycle."""
    return superoperator_matrix(build_hamiltonian(model),
                                build_collapse_ops(model),
                                labels=model.labels)


@dataclass(frozen=True)
class DensityOperator:
    """Density matrix with optional level labels."""

    matrix: np.ndarray
    labels: tuple | None = None

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("density matrix must be square")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def validate(self, tol: float = 1e-10) -> None:
        """Raise unless Hermitian, unit trace, and positive within tol."""
        m = self.matrix
        if not np.all(np.isfinite(m)):
            raise NumericalError("density matrix has non-finite entries")
        herm = np.max(np.abs(m - m.conj().T))
        if herm > tol:
            raise NumericalError(f"density matrix not Hermitian: {herm:.3e}")
        tr = abs(m.trace() - 1.0)
        if tr > tol:
            raise NumericalError(f"density matrix trace off by {tr:.3e}")
        w = np.linalg.eigvalsh((m + m.conj().T) / 2.0)
        if w.min() < -tol:
            raise NumericalError(f"negative eigenvalue {w.min():.3e}")

    def population(self, which) -> float:
        if isinstance(which, str):
            if self.labels is None:
                raise ValueError("no labels attached")
            which = self.labels.index(which)
        return float(self.matrix[which, which].real)

    def expectation(self, op: np.ndarray) -> complex:
        return complex(np.trace(np.asarray(op) @ self.matrix))


def _solve_refined(a: np.ndarray, b: np.ndarray, passes: int = 2) -> np.ndarray:
    """LU solve with iterative refinement.

    The orbital dephasing rate makes these systems stiff (condition
    numbers around 1e8); refinement recovers the accuracy the downstream
    tolerance checks need at negligible cost.
    """
    with warnings.catch_warnings():
        # exact singularity is diagnosed by the caller; the factor-time
        # warning would just duplicate that report
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu = scipy.linalg.lu_factor(a, check_finite=False)
        x = scipy.linalg.lu_solve(lu, b, check_finite=False)
        for _ in range(passes):
            x = x + scipy.linalg.lu_solve(lu, b - a @ x, check_finite=False)
    return x


def _kernel_diagnostics(s: np.ndarray, context: str):
    """Raise the appropriate error after a failed steady-state solve."""
    sv = scipy.linalg.svdvals(s)
    smallest = float(sv[-1])
    second = float(sv[-2])
    scale = float(sv[0])
    if second < 1e3 * max(smallest, 1e-14 * scale):
        raise DegenerateSteadyStateError(
            f"{context}: stationary space is degenerate; two smallest "
            f"singular values {smallest:.3e}, {second:.3e}",
            smallest=smallest, second_smallest=second)
    raise NumericalError(
        f"{context}: steady-state solve failed; smallest singular values "
        f"{smallest:.3e}, {second:.3e}")


def steady_state(op: LiouvilleOperator, residual_tol: float = 1e-10,
                 ) -> DensityOperator:
    """Unique stationary density matrix of the generator.

    Solves S vec(rho) = 0 with the first row replaced by the trace
    constraint (valid because the generator is trace preserving), then
    applies two iterative-refinement passes; the orbital-dephasing scale
    makes the system ill conditioned enough that plain LU is not accurate
    enough for downstream tolerance checks.  A residual above
    residual_tol * |S|_F triggers an SVD diagnostic that distinguishes a
    degenerate stationary space from a plain numerical failure.
    """
    s = op.matrix
    dim = op.dim
    a = np.array(s, dtype=complex)
    trace_row = np.zeros(dim * dim, dtype=complex)
    trace_row[:: dim + 1] = 1.0
    a[0, :] = trace_row
    b = np.zeros(dim * dim, dtype=complex)
    b[0] = 1.0
    try:
        x = _solve_refined(a, b)
    except scipy.linalg.LinAlgError:
        _kernel_diagnostics(s, "steady_state")
    if not np.all(np.isfinite(x)):
        _kernel_diagnostics(s, "steady_state")
    rho = x.reshape(dim, dim)
    rho = (rho + rho.conj().T) / 2.0
    rho = rho / rho.trace().real
    residual = float(np.linalg.norm(s @ rho.reshape(-1)))
    scale = float(np.linalg.norm(s))
    if residual > residual_tol * max(scale, 1.0):
        _kernel_diagnostics(s, "steady_state")
    return DensityOperator(matrix=rho, labels=op.labels)


def evolve(op: LiouvilleOperator, rho0, t_us) -> list[DensityOperator]:
    """Propagate rho0 through the generator, sampling at times t_us.

    Times must be finite, non-negative and non-decreasing, measured from
    t = 0 where rho0 is defined.  Uses the matrix exponential with caching
    over repeated step sizes, so uniform grids cost one expm.
    """
    t = np.asarray(t_us, dtype=float)
    if t.ndim != 1 or len(t) == 0 or not np.all(np.isfinite(t)):
        raise ValueError("time grid must be a finite 1-d array")
    if t[0] < 0 or np.any(np.diff(t) < 0):
        raise ValueError("time grid must be non-negative and non-decreasing")
    rho0 = rho0 if isinstance(rho0, DensityOperator) else DensityOperator(
        np.asarray(rho0, dtype=complex), labels=op.labels)
    if rho0.dim != op.dim:
        raise ValueError("rho0 dimension does not match the generator")
    rho0.validate(tol=1e-8)

    v = rho0.matrix.reshape(-1).astype(complex)
    out = []
    cache = {}
    prev_t = 0.0
    for tk in t:
        dt = float(tk - prev_t)
        prev_t = float(tk)
        if dt > 0:
            key = dt
            if key not in cache:
                e = scipy.linalg.expm(op.matrix * dt)
                # The exact propagator maps unit-trace states to
                # unit-trace states, so w E = w for w = vec(I)^T.  expm
                # leaves a small trace defect on stiff generators that
                # compounds over many steps; project it out by spreading
                # each column's defect over the diagonal.
                w = np.eye(op.dim, dtype=complex).reshape(-1)
                e -= np.outer(w, w @ e - w) / op.dim
                cache[key] = e
            v = cache[key] @ v
        if not np.all(np.isfinite(v)):
            raise NumericalError(f"propagation diverged at t = {tk:.6g} us")
        out.append(DensityOperator(matrix=v.reshape(op.dim, op.dim).copy(),
                                   labels=op.labels))
    return out


def _spin_matrices(spin: float):
    """(I_z, I_+) for the given spin, basis ordered m = +I ... -I."""
    dim = int(round(2 * spin + 1))
    m = spin - np.arange(dim)
    iz = np.diag(m).astype(complex)
    ip = np.zeros((dim, dim), dtype=complex)
    for k in range(1, dim):
        ip[k - 1, k] = math.sqrt(spin * (spin + 1) - m[k] * (m[k] + 1))
    return iz, ip


def nuclear_labels(spin: float) -> tuple:
    if spin == 0.5:
        return ("+1/2", "-1/2")
    if spin == 1.0:
        return ("+1", "0", "-1")
    raise ValueError("unsupported spin")


def _embed(ops: dict[int, np.ndarray], dims: list[int]) -> np.ndarray:
    """Kron product with identity on every subsystem not listed in ops."""
    out = np.array([[1.0 + 0j]])
    for k, d in enumerate(dims):
        factor = ops.get(k, np.eye(d, dtype=complex))
        out = np.kron(out, factor)
    return out


MAX_JOINT_DIM = 32


def joint_lindblad(model: NvModel, sites: list[NucleusSite],
                   include_excited_hfi: bool = True) -> LiouvilleOperator:
    """Exact Lindblad generator of the NV plus the listed nuclear spins.

    The Hamiltonian adds, to the bare NV part, each nucleus's Zeeman term
    gamma_n B I_z and the manifold-resolved hyperfine coupling
    sum_ab S_a A[a,b] I_b with the ground (and, when include_excited_hfi,
    excited) tensor on the corresponding orbital manifold.  Jump operators
    act on the NV factor alone.  Dimension is capped at MAX_JOINT_DIM.
    """
    labels = model.labels
    nv_dim = model.dim
    dims = [nv_dim] + [s.multiplicity for s in sites]
    total = int(np.prod(dims))
    if total > MAX_JOINT_DIM:
        raise ValueError(
            f"joint dimension {total} exceeds cap {MAX_JOINT_DIM}")

    ops = manifold_spin_ops(labels)
    gx = (ops["gp"] + ops["gm"]) / 2.0
    gy = (ops["gp"] - ops["gm"]) / 2.0j
    ex = (ops["ep"] + ops["em"]) / 2.0
    ey = (ops["ep"] - ops["em"]) / 2.0j
    s_ground = [gx, gy, ops["gz"]]
    s_excited = [ex, ey, ops["ez"]]

    h = _embed({0: build_hamiltonian(model)}, dims)
    for k, site in enumerate(sites):
        iz, ip = _spin_matrices(site.spin)
        ix = (ip + ip.conj().T) / 2.0
        iy = (ip - ip.conj().T) / 2.0j
        i_ops = [ix, iy, iz]
        zeeman = site.gamma_n_mhz_per_t * model.b_mt * 1e-3
        h += mhz_to_angular(zeeman) * _embed({k + 1: iz}, dims)
        for a in range(3):
            for b in range(3):
                coeff = site.ground_tensor.matrix[a, b]
                if coeff != 0.0:
                    h += mhz_to_angular(coeff) * _embed(
                        {0: s_ground[a], k + 1: i_ops[b]}, dims)
                if include_excited_hfi:
                    coeff_e = site.excited_tensor.matrix[a, b]
                    if coeff_e != 0.0:
                        h += mhz_to_angular(coeff_e) * _embed(
                            {0: s_excited[a], k + 1: i_ops[b]}, dims)

    collapse = [_embed({0: c}, dims) for c in build_collapse_ops(model)]
    joint_labels = tuple(labels)
    for site in sites:
        joint_labels = tuple(
            f"{a}|{b}" for a in joint_labels for b in nuclear_labels(site.spin))
    return superoperator_matrix(h, collapse, labels=joint_labels)


def partial_trace(rho: np.ndarray, dims: list[int], keep: int) -> np.ndarray:
    """Reduced density matrix of subsystem `keep`."""
    n = len(dims)
    rho = np.asarray(rho).reshape(dims + dims)
    for k in reversed(range(n)):
        if k == keep:
            continue
        rho = np.trace(rho, axis1=k, axis2=k + (rho.ndim // 2))
    return rho


def nuclear_polarizations(rho: DensityOperator, model: NvModel,
                          sites: list[NucleusSite]) -> np.ndarray:
    """p_i = <I_z,i> / I_i for each nucleus of a joint density matrix."""
    dims = [model.dim] + [s.multiplicity for s in sites]
    out = np.zeros(len(sites))
    for k, site in enumerate(sites):
        iz, _ = _spin_matrices(site.spin)
        red = partial_trace(rho.matrix, dims, k + 1)
        out[k] = float(np.trace(red @ iz).real) / site.spin
    return out


def nv_populations(rho: DensityOperator, model: NvModel,
                   sites: list[NucleusSite]) -> dict:
    """Populations of the NV levels of a joint density matrix."""
    dims = [model.dim] + [s.multiplicity for s in sites]
    red = partial_trace(rho.matrix, dims, 0)
    return {lab: float(red[i, i].real) for i, lab in enumerate(model.labels)}
