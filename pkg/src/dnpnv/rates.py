"""Nuclear flip rates: resolvent theory, sector closed form, golden rule.

Three tiers of the same physics, from most to least general:

- rate_resolvent: second-order rate from the conditional NV Liouvillian,
  valid for any level set and any hyperfine tensor.
- rate_sector / rho_gg_closed_form: the five-level coherence sector closes
  into four linear equations; solving them (or the equivalent continued
  fraction) reproduces the resolvent exactly.
- rate_golden_rule: weak-pump limit; a Lorentzian of half-width
  (dephasing + pump rate) at the flip mismatch.

All rates are angular decay constants in 1/us.  m is the nuclear spin
projection before the flip and direction = +-1 the sense of the flip.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .liouville import (NvModel, build_collapse_ops, build_hamiltonian,
                        manifold_spin_ops, steady_state, superoperator_matrix,
                        _solve_refined)
from .physmodel import NucleusSite, energy_mismatch
from .units import mhz_to_angular, nuclear_zeeman_mhz

NEGATIVE_RATE_FLOOR = -1e-12


def lorentzian(x, hwhm):
    """Unit-area Lorentzian (hwhm/pi) / (x^2 + hwhm^2).

    x and hwhm must share units; the result carries the inverse unit.
    """
    hwhm = np.asarray(hwhm, dtype=float)
    if np.any(hwhm <= 0):
        raise ValueError("Lorentzian half-width must be positive")
    x = np.asarray(x, dtype=float)
    out = (hwhm / math.pi) / (x * x + hwhm * hwhm)
    return out if out.ndim else float(out)


def _clamp_rate(w: float, context: str) -> float:
    if w < NEGATIVE_RATE_FLOOR:
        raise NumericalError(f"{context}: negative rate {w:.3e} 1/us")
    return max(w, 0.0)


def knight_field_z(model: NvModel, site: NucleusSite) -> np.ndarray:
    """Longitudinal hyperfine operator F_z on the NV levels, rad/us.

    This is the electron-side coefficient of I_z: sum_a S_a A[a, z] with
    the ground tensor on the ground manifold and the excited tensor on the
    excited one.  On the five-level set the Methods-style diagonal
    reduction applies (only S_z A_zz survives); on seven levels the
    transverse-electron terms A_xz, A_yz enter through S_x, S_y.
    """
    ops = manifold_spin_ops(model.labels)
    a_g = site.ground_tensor.matrix
    a_e = site.excited_tensor.matrix
    if model.levels == "five":
        f = a_g[2, 2] * ops["gz"] + a_e[2, 2] * ops["ez"]
    else:
        gx = (ops["gp"] + ops["gm"]) / 2.0
        gy = (ops["gp"] - ops["gm"]) / 2.0j
        ex = (ops["ep"] + ops["em"]) / 2.0
        ey = (ops["ep"] - ops["em"]) / 2.0j
        f = (a_g[0, 2] * gx + a_g[1, 2] * gy + a_g[2, 2] * ops["gz"]
             + a_e[0, 2] * ex + a_e[1, 2] * ey + a_e[2, 2] * ops["ez"])
    return mhz_to_angular(f)


def flip_operator(model: NvModel, site: NucleusSite, direction: int,
                  ) -> np.ndarray:
    """Electron operator multiplying I_{+direction} in the HFI, rad/us.

    Built from the ground-state tensor only; the excited transverse
    coupling is deliberately excluded from the rate tiers (its effect is
    probed by the joint Lindblad tier and bounded by
    rate_excited_estimate).  For direction = +1 this is F_-, the operator
    that accompanies a nuclear raising flip.
    """
    if direction not in (+1, -1):
        raise ValueError("direction must be +1 or -1")
    ops = manifold_spin_ops(model.labels)
    t = site.ground_tensor
    if direction == +1:
        f = (t.a_plus_minus * ops["gm"] + t.a_minus_minus * ops["gp"]) / 2.0
        f = f + t.a_z_minus * ops["gz"]
    else:
        f = (t.a_minus_plus * ops["gp"] + t.a_plus_plus * ops["gm"]) / 2.0
        f = f + t.a_z_plus * ops["gz"]
    return mhz_to_angular(f)


def conditional_liouvillian(model: NvModel, site: NucleusSite, n: float,
                            m: float):
    """NV generator conditioned on nuclear projections (n left, m right).

    The nuclear I_z coupling enters as the sector shift
    -i (n F_z rho - rho m F_z); with n = m this is the generator whose
    steady state is the pre-flip conditional NV state.
    """
    f_z = knight_field_z(model, site)
    return superoperator_matrix(build_hamiltonian(model),
                                build_collapse_ops(model),
                                conditional=(f_z, n, m),
                                labels=model.labels)


def flip_strength(site: NucleusSite, m: float, direction: int) -> float:
    """Angular-momentum factor xi = I(I+1) - m(m + direction)."""
    spin = site.spin
    return spin * (spin + 1.0) - m * (m + direction)


def resolvent_transform(generator: np.ndarray, omega_ang: float,
                        source: np.ndarray, probe: np.ndarray) -> float:
    """Re Tr[probe^+ (G - i*omega)^(-1) source] for a stable generator G.

    This is the one-sided Fourier transform of the probe-source
    correlation function at angular frequency omega, evaluated as a
    linear solve against the shifted generator (never as a time
    quadrature; the optical rates make the integrand stiff).  source and
    probe are dim x dim operators; G acts on row-major vectorized ones.
    """
    dim2 = generator.shape[0]
    a = generator - 1j * omega_ang * np.eye(dim2)
    src = np.asarray(source, dtype=complex).reshape(-1)
    x = _solve_refined(a, src)
    if not np.all(np.isfinite(x)):
        raise NumericalError("resolvent solve produced non-finite values")
    residual = np.linalg.norm(a @ x - src)
    if residual > 1e-8 * max(np.linalg.norm(src), 1e-300):
        raise NumericalError(
            "resolvent is near-singular (shifted generator has an "
            f"eigenvalue too close to zero): residual {residual:.3e}")
    return float(np.vdot(np.asarray(probe, dtype=complex).reshape(-1),
                         x).real)


def rate_resolvent(model: NvModel, site: NucleusSite, m: float,
                   direction: int) -> float:
    """Flip rate m -> m + direction from the conditional-resolvent theory.

    W = -(xi/2) Re Tr[ F^+ (L_cond - i*direction*omega_n)^(-1) F P_m ]
    with F the flip operator, P_m the conditional steady state of the
    diagonal generator, and omega_n the nuclear Zeeman frequency.  Exact
    to second order in the transverse HFI for any pump strength.
    """
    xi = flip_strength(site, m, direction)
    if xi <= 0:
        return 0.0
    p_m = steady_state(conditional_liouvillian(model, site, m, m))
    l_cond = conditional_liouvillian(model, site, m + direction, m)
    f = flip_operator(model, site, direction)
    omega_n = mhz_to_angular(
        nuclear_zeeman_mhz(site.gamma_n_mhz_per_t, model.b_mt))
    w = -(xi / 2.0) * resolvent_transform(
        l_cond.matrix, direction * omega_n, f @ p_m.matrix, f)
    return _clamp_rate(w, "rate_resolvent")


def _sector_indices(model: NvModel) -> list[int]:
    labels = model.labels
    dim = model.dim
    pairs = [("-1g", "0g"), ("-1e", "0g"), ("-1g", "0e"), ("-1e", "0e")]
    return [labels.index(a) * dim + labels.index(b) for a, b in pairs]


def sector_matrix(model: NvModel, site: NucleusSite, m: float,
                  direction: int) -> np.ndarray:
    """The closed 4x4 linear system of the five-level coherence sector.

    Rows/columns order: (-1g,0g), (-1e,0g), (-1g,0e), (-1e,0e).  These
    four coherences couple only among themselves under the five-level
    conditional generator (spontaneous channels carry no coherence between
    them), so the submatrix of the shifted generator is exact.
    """
    if model.levels != "five":
        raise ValueError("the closed sector exists on the five-level set")
    l_cond = conditional_liouvillian(model, site, m + direction, m)
    omega_n = mhz_to_angular(
        nuclear_zeeman_mhz(site.gamma_n_mhz_per_t, model.b_mt))
    a = l_cond.matrix - 1j * direction * omega_n * np.eye(model.dim ** 2)
    idx = _sector_indices(model)
    return a[np.ix_(idx, idx)]


def rho_gg_sector(model: NvModel, site: NucleusSite, m: float,
                  direction: int) -> complex:
    """Unit-source response of the (-1g, 0g) coherence, solved numerically."""
    a = sector_matrix(model, site, m, direction)
    e1 = np.zeros(4, dtype=complex)
    e1[0] = 1.0
    return complex(np.linalg.solve(a, e1)[0])


SECTOR_PAIRS = (("-1g", "0g"), ("-1e", "0g"), ("-1g", "0e"), ("-1e", "0e"))


def sector_denominators(model: NvModel, site: NucleusSite, m: float,
                        direction: int):
    """Detunings and linewidths of the four sector coherences, in MHz.

    Returns (detunings, linewidths), each a length-4 array ordered as
    SECTOR_PAIRS.  The detunings are the rotating-frame level splittings
    shifted by the nuclear Zeeman and the post-flip longitudinal HFI;
    the linewidths are the half-sums of the decay rates feeding each
    coherence (ground dephasing counts once on ground-ground, half on
    mixed pairs; the orbital decay is common mode within the excited
    manifold and drops out of the excited-excited pair).
    """
    if model.levels != "five":
        raise ValueError("the closed sector exists on the five-level set")
    rt = model.rates
    n = m + direction
    zeeman = nuclear_zeeman_mhz(site.gamma_n_mhz_per_t, model.b_mt)
    a_gzz = site.ground_tensor.a_zz
    a_ezz = site.excited_tensor.a_zz
    dl = model.pump.laser_detuning_mhz

    d1 = model.detuning_mhz + direction * zeeman - n * a_gzz
    d4 = model.excited_detuning_mhz + direction * zeeman - n * a_ezz
    d2 = d4 + dl
    d3 = d1 - dl
    g1 = rt.dephasing_mhz
    g2 = (rt.orbital_mhz + rt.radiative_mhz + rt.isc_mhz
          + rt.dephasing_mhz) / 2.0
    g3 = (rt.orbital_mhz + rt.radiative_mhz + rt.isc0_mhz
          + rt.dephasing_mhz) / 2.0
    g4 = rt.radiative_mhz + rt.isc_mhz / 2.0 + rt.isc0_mhz / 2.0
    return (np.array([d1, d2, d3, d4]), np.array([g1, g2, g3, g4]))


def rho_gg_analytic(detunings, linewidths, omega_r) -> complex:
    """Exact five-level resolvent element of the ground-ground coherence.

    detunings and linewidths run over the four sector coherences in
    SECTOR_PAIRS order; all three inputs share one frequency unit and the
    result carries the inverse unit.  With D_j = detuning_j - i*linewidth_j
    and the pump self-energy Q = (omega_r/2)^2 (1/D2 + 1/D3),

        rho_gg = i / (D1 - Q (1 + Q / (D4 - Q))).

    At omega_r = 0 this is i/D1 exactly, so -Re rho_gg is pi times the
    unit-area Lorentzian of half-width linewidth_1 at detuning_1.
    """
    detunings = np.asarray(detunings, dtype=float)
    linewidths = np.asarray(linewidths, dtype=float)
    if detunings.shape != (4,) or linewidths.shape != (4,):
        raise ValueError("expected four sector detunings and linewidths")
    if np.any(linewidths <= 0):
        raise ValueError("sector linewidths must be positive")
    d = detunings - 1j * linewidths
    q = (omega_r / 2.0) ** 2 * (1.0 / d[1] + 1.0 / d[2])
    return complex(1j / (d[0] - q * (1.0 + q / (d[3] - q))))


def rho_gg_closed_form(model: NvModel, site: NucleusSite, m: float,
                       direction: int) -> complex:
    """rho_gg_analytic evaluated for a model and site, in angular units."""
    detunings, linewidths = sector_denominators(model, site, m, direction)
    return rho_gg_analytic(mhz_to_angular(detunings),
                           mhz_to_angular(linewidths),
                           mhz_to_angular(model.pump.omega_r_mhz))


def rate_sector(model: NvModel, site: NucleusSite, m: float,
                direction: int) -> float:
    """Closed-form five-level rate: -(xi |A|^2 / 4) P_g Re rho_gg.

    A is the ground transverse combination selected by the flip direction.
    Agrees with rate_resolvent up to the pump coherence of the conditional
    state, which this closed form neglects (relative difference of order
    R(1 - P_e/P_g)/optical linewidth, about 4e-8 at R = 0.4 MHz).
    """
    xi = flip_strength(site, m, direction)
    if xi <= 0:
        return 0.0
    t = site.ground_tensor
    a = t.a_plus_minus if direction == +1 else t.a_plus_plus
    a_ang = mhz_to_angular(abs(a))
    rho = rho_gg_closed_form(model, site, m, direction)
    w = -(xi * a_ang ** 2 / 4.0) * model.p_ground * rho.real
    return _clamp_rate(w, "rate_sector")


def golden_linewidth_mhz(model: NvModel) -> float:
    """Half-width of the golden-rule Lorentzian: dephasing + pump rate."""
    return model.rates.dephasing_mhz + model.pump_rate_mhz


def weak_pump_ok(model: NvModel) -> bool:
    """True when R <= 0.1 (radiative + isc/2), the golden-rule regime."""
    optical = model.rates.radiative_mhz + model.rates.isc_mhz / 2.0
    return model.pump_rate_mhz <= 0.1 * optical


def rate_golden_rule(model: NvModel, site: NucleusSite, m: float,
                     direction: int) -> float:
    """Golden-rule flip rate, the weak-pump limit of the sector form.

    W = P_g xi 2 pi |A/(2 sqrt 2)|^2 * Lorentzian(mismatch; dephasing + R).
    Warns when the pump rate is not small against the optical linewidth
    radiative + isc/2, where the underlying adiabatic elimination starts
    to degrade.
    """
    if not weak_pump_ok(model):
        optical = model.rates.radiative_mhz + model.rates.isc_mhz / 2.0
        warnings.warn(
            f"golden rule assumes weak pumping; R = "
            f"{model.pump_rate_mhz:.3g} MHz is not small against the "
            f"optical linewidth {optical:.3g} MHz", stacklevel=2)
    xi = flip_strength(site, m, direction)
    if xi <= 0:
        return 0.0
    t = site.ground_tensor
    a = t.a_plus_minus if direction == +1 else t.a_plus_plus
    a_ang = mhz_to_angular(abs(a))
    x_ang = mhz_to_angular(energy_mismatch(
        m, direction, model.b_mt, site.ground_tensor.a_zz,
        site.gamma_n_mhz_per_t, model.constants, model.delta_shift_mhz))
    gamma_ang = mhz_to_angular(golden_linewidth_mhz(model))
    w = (model.p_ground * xi * 2.0 * math.pi * a_ang ** 2 / 8.0
         * lorentzian(x_ang, gamma_ang))
    return _clamp_rate(w, "rate_golden_rule")


_METHODS = {
    "resolvent": rate_resolvent,
    "sector": rate_sector,
    "golden": rate_golden_rule,
}


@dataclass(frozen=True)
class RatePair:
    """Up/down flip rates of one spin-1/2 nucleus at one field point.

    w_plus is the m = -1/2 -> +1/2 rate and w_minus the reverse, both
    angular decay constants in 1/us.  The mismatches are the Lorentzian
    arguments of the two flips (MHz); b_mt is None for pairs built from
    bare detunings rather than a field point.  weak_pump_ok records
    whether the producing method was inside its validity regime.
    """

    w_plus: float
    w_minus: float
    method: str
    mismatch_plus_mhz: float
    mismatch_minus_mhz: float
    b_mt: float | None = None
    weak_pump_ok: bool = True

    def __post_init__(self):
        for w in (self.w_plus, self.w_minus):
            if not (np.isfinite(w) and w >= 0):
                raise ValueError("rates must be finite and non-negative")

    @property
    def total(self) -> float:
        return self.w_plus + self.w_minus


def rate_pair(model: NvModel, site: NucleusSite, method: str = "golden",
              ) -> RatePair:
    """Both flip rates of a spin-1/2 site, by the chosen method."""
    if site.spin != 0.5:
        raise ValueError("rate_pair applies to spin-1/2 sites")
    if method not in _METHODS:
        raise ValueError(f"unknown method {method!r}")
    fn = _METHODS[method]
    with warnings.catch_warnings():
        if method == "golden":
            warnings.simplefilter("once")
        w_plus = fn(model, site, -0.5, +1)
        w_minus = fn(model, site, +0.5, -1)
    mk = lambda d, m: energy_mismatch(
        m, d, model.b_mt, site.ground_tensor.a_zz, site.gamma_n_mhz_per_t,
        model.constants, model.delta_shift_mhz)
    ok = weak_pump_ok(model) if method == "golden" else True
    return RatePair(w_plus=w_plus, w_minus=w_minus, method=method,
                    mismatch_plus_mhz=mk(+1, -0.5),
                    mismatch_minus_mhz=mk(-1, +0.5),
                    b_mt=model.b_mt, weak_pump_ok=ok)


def rate_pair_spin_half(delta_mhz: float, delta_n_mhz: float,
                        gamma_mhz: float, p_g: float, a_pp_mhz: complex,
                        a_pm_mhz: complex) -> RatePair:
    """Golden-rule pair of a spin-1/2 nucleus from bare detunings.

    W_+ = P_g 2 pi |A_pm/(2 sqrt 2)|^2 Lorentzian(Delta + Delta_N/2; Gamma)
    and W_- likewise with A_pp at Delta - Delta_N/2.  All frequency inputs
    in MHz; the rates come back as angular decay constants in 1/us.
    """
    if gamma_mhz <= 0:
        raise ValueError("linewidth gamma_mhz must be positive")
    if not (0.0 <= p_g <= 1.0):
        raise ValueError("p_g must lie in [0, 1]")
    x_plus = delta_mhz + delta_n_mhz / 2.0
    x_minus = delta_mhz - delta_n_mhz / 2.0
    gamma_ang = mhz_to_angular(gamma_mhz)
    pref = p_g * 2.0 * math.pi / 8.0
    w_plus = (pref * mhz_to_angular(abs(a_pm_mhz)) ** 2
              * lorentzian(mhz_to_angular(x_plus), gamma_ang))
    w_minus = (pref * mhz_to_angular(abs(a_pp_mhz)) ** 2
               * lorentzian(mhz_to_angular(x_minus), gamma_ang))
    return RatePair(w_plus=w_plus, w_minus=w_minus, method="golden",
                    mismatch_plus_mhz=x_plus, mismatch_minus_mhz=x_minus)


def golden_coefficients(model: NvModel, site: NucleusSite):
    """Pieces of the golden-rule pair for vectorized evaluation.

    Returns (coef_plus, coef_minus, x_plus_mhz, x_minus_mhz, gamma_mhz):
    W+- as a function of a longitudinal shift h (MHz) is
    coef * Lorentzian(2 pi (x - h), 2 pi gamma), coef in rad/us units so
    the result is 1/us.  Used by the multispin kernels, where h is the
    spectator Overhauser shift.
    """
    if site.spin != 0.5:
        raise ValueError("vectorized rates apply to spin-1/2 sites")
    t = site.ground_tensor
    pref = model.p_ground * 2.0 * math.pi / 8.0
    coef_plus = pref * mhz_to_angular(abs(t.a_plus_minus)) ** 2
    coef_minus = pref * mhz_to_angular(abs(t.a_plus_plus)) ** 2
    x_plus = energy_mismatch(
        -0.5, +1, model.b_mt, t.a_zz, site.gamma_n_mhz_per_t,
        model.constants, model.delta_shift_mhz)
    x_minus = energy_mismatch(
        +0.5, -1, model.b_mt, t.a_zz, site.gamma_n_mhz_per_t,
        model.constants, model.delta_shift_mhz)
    return coef_plus, coef_minus, x_plus, x_minus, golden_linewidth_mhz(model)


def rate_excited_estimate(a_e_mhz: float, model: NvModel) -> float:
    """Scale estimate of flips driven by the excited-state HFI alone.

    Treats the transverse excited coupling a_e as a perturbation flipping
    the nucleus while the NV sits in the excited manifold: a Lorentzian of
    half-width the excited spin coherence decay, evaluated at the excited
    zero-field splitting, weighted by the excited-state occupation.
    Returns 1/us.
    """
    if a_e_mhz < 0:
        raise ValueError("a_e_mhz must be >= 0")
    rt = model.rates
    gamma_mhz = rt.radiative_mhz + rt.isc_mhz / 2.0
    a_ang = mhz_to_angular(a_e_mhz)
    w = (2.0 * math.pi * (a_ang / 2.0) ** 2
         * lorentzian(mhz_to_angular(model.constants.d_es_mhz),
                      mhz_to_angular(gamma_mhz))
         * model.p_excited)
    return float(w)


def correlation_time(model: NvModel) -> float:
    """Correlation time of the electron Knight field seen by the nucleus.

    Sum of the inverse angular rates of the two slow steps of the optical
    cycle: pumping through the ISC branch (R gamma_1/(gamma_1 + gamma))
    and the singlet decay.  Diverges as the pump switches off.
    """
    r = model.pump_rate_mhz
    rt = model.rates
    if r <= 0:
        raise ValueError("no optical initialization: pump rate is zero")
    isc_branch = r * rt.isc_mhz / (rt.isc_mhz + rt.radiative_mhz)
    return (1.0 / mhz_to_angular(isc_branch)
            + 1.0 / mhz_to_angular(rt.singlet_mhz))
