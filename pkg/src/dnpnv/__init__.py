"""DNP of 13C nuclei near the NV ground-state level anticrossing.

Three cross-validating tiers for one nucleus (exact joint Lindblad,
resolvent rate theory, golden rule) plus exact and mean-field solvers
for many nuclei.  See the README for the command-line interface.
"""

from .errors import (ConfigError, DegenerateSteadyStateError, DnpError,
                     FrozenSpinError, LatticeError, NonConvergenceError,
                     NumericalError)
from .physmodel import (DEFAULT_CONSTANTS, HfiTensor, NucleusSite,
                        PhysConstants, delta_n, detuning, dipolar_tensor,
                        energy_mismatch, export_sites, import_sites,
                        lattice_positions, sample_lattice,
                        spherical_position)
from .liouville import (DensityOperator, LiouvilleOperator, NvModel,
                        NvRates, PumpConfig, build_collapse_ops,
                        build_hamiltonian, evolve, joint_lindblad,
                        level_energies_mhz, nuclear_polarizations,
                        nv_liouvillian, nv_model, nv_populations,
                        partial_trace, steady_state)
from .rates import (RatePair, correlation_time, golden_coefficients,
                    golden_linewidth_mhz, rate_excited_estimate,
                    rate_golden_rule, rate_pair, rate_pair_spin_half,
                    rate_resolvent, resolvent_transform, rho_gg_analytic,
                    rho_gg_closed_form, sector_denominators, weak_pump_ok)
from .singlespin import (DnpResult, PolarizationState, dnp_steady,
                         markovian_validity, polarization_trajectory,
                         pss_dipolar, rate_equation_steady,
                         strong_hfi_check)
from .multispin import (JointDistribution, OverhauserStats, SpatialReport,
                        SpinEnsemble, conditional_rates,
                        exact_joint_steady, meanfield_dynamics,
                        meanfield_fixed_point, meanfield_rates,
                        overhauser_field, overhauser_stats, spatial_report)
from ._kernels import active_backend, numba_available

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DegenerateSteadyStateError", "DnpError",
    "FrozenSpinError", "LatticeError", "NonConvergenceError",
    "NumericalError",
    "DEFAULT_CONSTANTS", "HfiTensor", "NucleusSite", "PhysConstants",
    "delta_n", "detuning", "dipolar_tensor", "energy_mismatch",
    "export_sites", "import_sites", "lattice_positions", "sample_lattice",
    "spherical_position",
    "DensityOperator", "LiouvilleOperator", "NvModel", "NvRates",
    "PumpConfig", "build_collapse_ops", "build_hamiltonian", "evolve",
    "joint_lindblad", "level_energies_mhz", "nuclear_polarizations",
    "nv_liouvillian", "nv_model", "nv_populations", "partial_trace",
    "steady_state",
    "RatePair", "correlation_time", "golden_coefficients",
    "golden_linewidth_mhz", "rate_excited_estimate", "rate_golden_rule",
    "rate_pair", "rate_pair_spin_half", "rate_resolvent",
    "resolvent_transform", "rho_gg_analytic", "rho_gg_closed_form",
    "sector_denominators", "weak_pump_ok",
    "DnpResult", "PolarizationState", "dnp_steady", "markovian_validity",
    "polarization_trajectory", "pss_dipolar", "rate_equation_steady",
    "strong_hfi_check",
    "JointDistribution", "OverhauserStats", "SpatialReport",
    "SpinEnsemble", "conditional_rates", "exact_joint_steady",
    "meanfield_dynamics", "meanfield_fixed_point", "meanfield_rates",
    "overhauser_field", "overhauser_stats", "spatial_report",
    "active_backend", "numba_available",
    "__version__",
]
