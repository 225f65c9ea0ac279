"""Static physical model: constants, hyperfine tensors, sites, lattice.

Everything here is time independent: physical constants of the NV center,
hyperfine interaction (HFI) tensors, the geometry of a 13C nuclear spin
relative to the NV axis, and random diamond-lattice occupation.  Energies
and couplings are ordinary frequencies in MHz, positions in Angstrom with
the vacancy at the origin and the NV axis along +z.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import LatticeError
from .units import nuclear_zeeman_mhz


@dataclass(frozen=True)
class PhysConstants:
    """NV and diamond constants.

    Frequencies in MHz, gyromagnetic ratios as tabulated (electron in
    MHz/mT, nuclear in MHz/T), lengths in Angstrom.
    """

    d_gs_mhz: float = 2870.0          # ground-state zero-field splitting
    d_es_mhz: float = 1410.0          # excited-state zero-field splitting
    gamma_e_mhz_per_mt: float = 28.025
    dipolar_mhz_a3: float = 20.0      # point-dipole prefactor A_dp * r^3
    lattice_a: float = 3.567          # conventional diamond cell edge

    def __post_init__(self):
        for name in ("d_gs_mhz", "d_es_mhz", "gamma_e_mhz_per_mt",
                     "dipolar_mhz_a3", "lattice_a"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def gslac_mt(self) -> float:
        """Field where the ground-state m=0 and m=-1 levels cross."""
        return self.d_gs_mhz / self.gamma_e_mhz_per_mt


DEFAULT_CONSTANTS = PhysConstants()

# Nuclear species: gyromagnetic ratio (MHz/T, sign physical) and spin.
SPECIES_GAMMA_MHZ_PER_T = {"13C": -10.705, "15N": -4.316, "14N": 3.077}
SPECIES_SPIN = {"13C": 0.5, "15N": 0.5, "14N": 1.0}


def _as_readonly(a):
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class HfiTensor:
    """Real 3x3 hyperfine tensor A (MHz), electron index first.

    The coupling is sum_ab S_a A[a, b] I_b.  The spherical combinations
    below are the coefficients that appear when the nuclear operators are
    written with I+- = Ix +- i*Iy and the electron ones with S+-:

        HFI = F_z I_z + (F_- I_+ + F_+ I_-) / 2
        F_+ = (a_minus_plus S_+ + a_plus_plus S_-) / 2 + a_z_plus S_z
        F_- = (a_minus_minus S_+ + a_plus_minus S_-) / 2 + a_z_minus S_z
    """

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (3, 3):
            raise ValueError("hyperfine tensor must be 3x3")
        if not np.all(np.isfinite(m)):
            raise ValueError("hyperfine tensor must be finite")
        object.__setattr__(self, "matrix", _as_readonly(m))

    @classmethod
    def zero(cls) -> "HfiTensor":
        return cls(np.zeros((3, 3)))

    def scaled(self, factor: float) -> "HfiTensor":
        return HfiTensor(self.matrix * factor)

    @property
    def a_zz(self) -> float:
        return float(self.matrix[2, 2])

    @property
    def a_plus_minus(self) -> complex:
        m = self.matrix
        return complex(m[0, 0] + m[1, 1], m[1, 0] - m[0, 1])

    @property
    def a_minus_plus(self) -> complex:
        return self.a_plus_minus.conjugate()

    @property
    def a_plus_plus(self) -> complex:
        m = self.matrix
        return complex(m[0, 0] - m[1, 1], m[0, 1] + m[1, 0])

    @property
    def a_minus_minus(self) -> complex:
        return self.a_plus_plus.conjugate()

    @property
    def a_z_plus(self) -> complex:
        m = self.matrix
        return complex(m[2, 0], m[2, 1])

    @property
    def a_z_minus(self) -> complex:
        return self.a_z_plus.conjugate()


def spherical_position(r: float, theta: float, phi: float = 0.0) -> np.ndarray:
    """Cartesian position (Angstrom) from polar angle theta off the NV axis."""
    st, ct = math.sin(theta), math.cos(theta)
    return np.array([r * st * math.cos(phi), r * st * math.sin(phi), r * ct])


def dipolar_tensor(position, constants: PhysConstants = DEFAULT_CONSTANTS) -> HfiTensor:
    """Point-dipole hyperfine tensor A_ab = A_dp(r) (3 n_a n_b - delta_ab).

    position is the nuclear site in Angstrom (NV frame).  A_dp(r) is the
    configured prefactor divided by r^3.  Sites closer than 0.5 Angstrom
    are rejected as unphysical.
    """
    pos = np.asarray(position, dtype=float)
    if pos.shape != (3,) or not np.all(np.isfinite(pos)):
        raise ValueError("position must be a finite 3-vector")
    r = float(np.linalg.norm(pos))
    if r < 0.5:
        raise ValueError(f"site radius {r:.3g} A is below 0.5 A (unphysical)")
    n = pos / r
    a_dp = constants.dipolar_mhz_a3 / r**3
    return HfiTensor(a_dp * (3.0 * np.outer(n, n) - np.eye(3)))


# Measured first-shell 13C tensors (MHz), NV frame with the xz cross term.
_FIRST_SHELL_GROUND = np.array([
    [198.6, 0.0, -21.5],
    [0.0, 123.0, 0.0],
    [-21.5, 0.0, 129.0],
])
_FIRST_SHELL_EXCITED = np.array([
    [103.2, 0.0, -32.6],
    [0.0, 56.7, 0.0],
    [-32.6, 0.0, 79.5],
])


@dataclass(frozen=True)
class NucleusSite:
    """A single nuclear spin coupled to the NV electron spin."""

    position_a: np.ndarray
    ground_tensor: HfiTensor
    excited_tensor: HfiTensor
    species: str = "13C"
    spin: float = 0.5
    gamma_n_mhz_per_t: float = SPECIES_GAMMA_MHZ_PER_T["13C"]

    def __post_init__(self):
        pos = np.asarray(self.position_a, dtype=float)
        if pos.shape != (3,) or not np.all(np.isfinite(pos)):
            raise ValueError("position must be a finite 3-vector")
        object.__setattr__(self, "position_a", _as_readonly(pos))
        if self.spin not in (0.5, 1.0):
            raise ValueError("only spin 1/2 and spin 1 nuclei are supported")
        if not np.isfinite(self.gamma_n_mhz_per_t):
            raise ValueError("gamma_n must be finite")

    @property
    def r(self) -> float:
        return float(np.linalg.norm(self.position_a))

    @property
    def theta(self) -> float:
        """Polar angle from the NV axis, radians."""
        return float(math.acos(np.clip(self.position_a[2] / self.r, -1, 1)))

    @property
    def multiplicity(self) -> int:
        return int(round(2 * self.spin + 1))

    @classmethod
    def from_tensors(cls, position, ground: HfiTensor, excited: HfiTensor,
                     species: str = "13C") -> "NucleusSite":
        return cls(position_a=position, ground_tensor=ground,
                   excited_tensor=excited, species=species,
                   spin=SPECIES_SPIN[species],
                   gamma_n_mhz_per_t=SPECIES_GAMMA_MHZ_PER_T[species])

    @classmethod
    def dipolar(cls, position, species: str = "13C",
                constants: PhysConstants = DEFAULT_CONSTANTS) -> "NucleusSite":
        """Site whose ground and excited tensors are both point-dipole."""
        t = dipolar_tensor(position, constants)
        return cls.from_tensors(position, t, t, species)

    @classmethod
    def first_shell(cls) -> "NucleusSite":
        """Nearest-neighbor 13C with the measured (non-dipolar) tensors.

        Nominal geometry: nearest-neighbor distance a*sqrt(3)/4 at the
        tetrahedral angle from the NV axis.  The rate and Lindblad builders
        only consume the tensors; the position is bookkeeping.
        """
        r_nn = DEFAULT_CONSTANTS.lattice_a * math.sqrt(3.0) / 4.0
        pos = spherical_position(r_nn, math.acos(-1.0 / 3.0), 0.0)
        return cls.from_tensors(pos, HfiTensor(_FIRST_SHELL_GROUND),
                                HfiTensor(_FIRST_SHELL_EXCITED), "13C")

    def with_tensors(self, ground: HfiTensor, excited: HfiTensor) -> "NucleusSite":
        return NucleusSite(position_a=self.position_a, ground_tensor=ground,
                           excited_tensor=excited, species=self.species,
                           spin=self.spin,
                           gamma_n_mhz_per_t=self.gamma_n_mhz_per_t)


def detuning(b_mt: float, constants: PhysConstants = DEFAULT_CONSTANTS,
             shift_mhz: float = 0.0) -> float:
    """Ground-state m=0 / m=-1 splitting D_gs - gamma_e B (+ static shift)."""
    if not b_mt > 0:
        raise ValueError("magnetic field must be positive")
    return constants.d_gs_mhz - constants.gamma_e_mhz_per_mt * b_mt + shift_mhz


def delta_n(b_mt: float, a_zz_mhz: float,
            gamma_n_mhz_per_t: float = SPECIES_GAMMA_MHZ_PER_T["13C"],
            ) -> float:
    """Energy cost 2 gamma_n B - A_zz of a nuclear flip-flop cycle.

    This is the mismatch between the up-flip and down-flip resonance
    conditions; the flip-rate asymmetry (and hence the polarization sign
    selectivity) is controlled by it.
    """
    return 2.0 * nuclear_zeeman_mhz(gamma_n_mhz_per_t, b_mt) - a_zz_mhz


def energy_mismatch(m: float, direction: int, b_mt: float, a_zz_mhz: float,
                    gamma_n_mhz_per_t: float = SPECIES_GAMMA_MHZ_PER_T["13C"],
                    constants: PhysConstants = DEFAULT_CONSTANTS,
                    shift_mhz: float = 0.0) -> float:
    """Detuning of the nuclear flip m -> m + direction within the GSLAC pair.

    direction is +1 (nuclear spin up) or -1 (down).  The flipped state sits
    at Delta + direction * gamma_n B - (m + direction) A_zz relative to the
    initial one, all in MHz.
    """
    if direction not in (+1, -1):
        raise ValueError("direction must be +1 or -1")
    delta = detuning(b_mt, constants, shift_mhz)
    zeeman = nuclear_zeeman_mhz(gamma_n_mhz_per_t, b_mt)
    return delta + direction * zeeman - (m + direction) * a_zz_mhz


# Conventional-cell fractional coordinates of the 8 diamond basis atoms.
_DIAMOND_BASIS = np.array([
    [0.0, 0.0, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0],
    [0.25, 0.25, 0.25], [0.25, 0.75, 0.75], [0.75, 0.25, 0.75],
    [0.75, 0.75, 0.25],
])

# Crystal [111] -> NV frame +z.  Rows are the NV-frame basis vectors
# expressed in cubic coordinates.
_CUBIC_TO_NV = np.array([
    [1.0, 1.0, -2.0],
    [-1.0, 1.0, 0.0],
    [1.0, 1.0, 1.0],
])
_CUBIC_TO_NV = _CUBIC_TO_NV / np.linalg.norm(_CUBIC_TO_NV, axis=1)[:, None]


def lattice_positions(r_min: float, r_max: float,
                      constants: PhysConstants = DEFAULT_CONSTANTS) -> np.ndarray:
    """All carbon positions with r_min <= |R| <= r_max, NV frame, Angstrom.

    The vacancy sits at the origin; the NV axis is the cubic [111]
    direction mapped to +z.  Positions are sorted lexicographically so the
    ordering is reproducible.
    """
    if not 0 < r_min < r_max:
        raise ValueError("need 0 < r_min < r_max")
    a = constants.lattice_a
    n = int(math.ceil(r_max / a)) + 1
    cells = np.arange(-n, n + 1)
    ii, jj, kk = np.meshgrid(cells, cells, cells, indexing="ij")
    corners = np.stack([ii, jj, kk], axis=-1).reshape(-1, 3)
    pos = (corners[:, None, :] + _DIAMOND_BASIS[None, :, :]).reshape(-1, 3) * a
    r = np.linalg.norm(pos, axis=1)
    pos = pos[(r >= r_min) & (r <= r_max)]
    pos = pos @ _CUBIC_TO_NV.T
    order = np.lexsort((pos[:, 2], pos[:, 1], pos[:, 0]))
    return pos[order]


def sample_lattice(seed: int, r_min: float = 3.0, r_max: float = 36.5,
                   abundance: float = 0.011,
                   constants: PhysConstants = DEFAULT_CONSTANTS,
                   ) -> list[NucleusSite]:
    """Randomly occupy lattice sites with 13C at the given abundance.

    Returns dipolar NucleusSite objects for the occupied positions, in the
    canonical lattice order.  abundance = 0 returns an empty list; an empty
    shell (no candidate positions at all) raises LatticeError.
    """
    if not 0.0 <= abundance <= 1.0:
        raise ValueError("abundance must lie in [0, 1]")
    pos = lattice_positions(r_min, r_max, constants)
    if len(pos) == 0:
        raise LatticeError(
            f"no lattice sites with {r_min} A <= r <= {r_max} A")
    rng = np.random.default_rng(seed)
    keep = rng.random(len(pos)) < abundance
    return [NucleusSite.dipolar(p, constants=constants) for p in pos[keep]]


def export_sites(sites: list[NucleusSite], path) -> None:
    """Write sites to JSON: position (Angstrom), species, ground tensor (MHz)."""
    records = [
        {
            "x_A": float(s.position_a[0]),
            "y_A": float(s.position_a[1]),
            "z_A": float(s.position_a[2]),
            "species": s.species,
            "tensor_MHz": [[float(v) for v in row]
                           for row in s.ground_tensor.matrix],
        }
        for s in sites
    ]
    with open(path, "w") as fh:
        json.dump(records, fh, indent=2, sort_keys=True)
        fh.write("\n")


def import_sites(path) -> list[NucleusSite]:
    """Read sites written by export_sites.

    The stored tensor is used for both the ground and excited manifolds
    (sampled dipolar lattices satisfy that by construction).
    """
    with open(path) as fh:
        records = json.load(fh)
    sites = []
    for rec in records:
        t = HfiTensor(np.array(rec["tensor_MHz"], dtype=float))
        pos = np.array([rec["x_A"], rec["y_A"], rec["z_A"]], dtype=float)
        sites.append(NucleusSite.from_tensors(pos, t, t, rec["species"]))
    return sites
