"""Single-nucleus DNP observables built on the flip-rate pair.

The nuclear Zeeman populations obey a birth-death rate equation; its
stationary state, the exponential approach to it, the analytic dipolar
limit, and the validity gates (Markovianity, strong-HFI condition) live
here.  Rates are angular decay constants in 1/us throughout; the
depolarization rate gamma_dep is quoted in 1/s at the API surface.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import FrozenSpinError
from .liouville import NvModel
from .rates import RatePair, correlation_time
from .units import per_s_to_per_us

GAMMA_DEP_DEFAULT_PER_S = 1.0


@dataclass(frozen=True)
class PolarizationState:
    """Populations of the nuclear Zeeman levels, m ascending from -I to +I."""

    populations: np.ndarray
    spin: float = 0.5

    def __post_init__(self):
        pops = np.asarray(self.populations, dtype=float)
        n = int(round(2.0 * self.spin)) + 1
        if pops.shape != (n,):
            raise ValueError(f"expected {n} populations for spin {self.spin}")
        if np.any(pops < -1e-12):
            raise ValueError("populations must be non-negative")
        if abs(pops.sum() - 1.0) > 1e-12:
            raise ValueError("populations must sum to one")
        pops = np.clip(pops, 0.0, None)
        object.__setattr__(self, "populations", pops)
        self.populations.setflags(write=False)

    @property
    def projections(self) -> np.ndarray:
        return -self.spin + np.arange(self.populations.size, dtype=float)

    @property
    def polarization(self) -> float:
        """<I_z>/I, in [-1, 1]."""
        return float(self.projections @ self.populations / self.spin)


@dataclass(frozen=True)
class DnpResult:
    """Steady-state DNP of one nucleus, with the rates that produced it.

    w_plus and w_minus are the flip rates in 1/us; w = w_plus + w_minus
    is the DNP rate whose inverse is the polarization build-up time
    (gamma_dep adds 2 gamma_dep to the relaxation toward p_ss but not to
    w itself).  markovian_ratio is w times the optical correlation time.
    """

    p_ss: float
    w_plus: float
    w_minus: float
    gamma_dep_per_s: float
    markovian_valid: bool
    markovian_ratio: float
    t_us: np.ndarray | None = field(default=None, repr=False)
    p_t: np.ndarray | None = field(default=None, repr=False)

    @property
    def w(self) -> float:
        return self.w_plus + self.w_minus

    @property
    def relaxation_rate(self) -> float:
        """Exponential rate toward p_ss: w + 2 gamma_dep (spin 1/2)."""
        return self.w + 2.0 * per_s_to_per_us(self.gamma_dep_per_s)


def _augmented_links(w_up, w_down, spin: float, gamma_dep_per_s: float):
    w_up = np.atleast_1d(np.asarray(w_up, dtype=float))
    w_down = np.atleast_1d(np.asarray(w_down, dtype=float))
    n_links = int(round(2.0 * spin))
    if n_links < 1:
        raise ValueError("spin must be at least 1/2")
    if w_up.shape != (n_links,) or w_down.shape != (n_links,):
        raise ValueError(f"expected {n_links} up and down rates "
                         f"for spin {spin}")
    if np.any(w_up < 0) or np.any(w_down < 0):
        raise ValueError("rates must be non-negative")
    if gamma_dep_per_s < 0:
        raise ValueError("gamma_dep_per_s must be non-negative")
    m = -spin + np.arange(n_links, dtype=float)
    xi = np.array([flip_strength_spin(spin, mk, +1) for mk in m])
    gdep = per_s_to_per_us(gamma_dep_per_s)
    return w_up + xi * gdep, w_down + xi * gdep


def flip_strength_spin(spin: float, m: float, direction: int) -> float:
    """xi = I(I+1) - m(m + direction) without a site object."""
    return spin * (spin + 1.0) - m * (m + direction)


def rate_equation_steady(w_up, w_down, spin: float = 0.5,
                         gamma_dep_per_s: float = 0.0) -> PolarizationState:
    """Stationary distribution of the nuclear Zeeman birth-death chain.

    w_up[k] is the rate m_k -> m_k + 1 and w_down[k] the reverse, with
    m_k = -I + k, both in 1/us.  Depolarization augments each link by
    xi_k * gamma_dep on both directions.  The chain is solved by
    detailed-balance products p_{k+1}/p_k = u_k/d_k; a link with d_k = 0
    is absorbing upward (all weight below it vanishes) and one with
    u_k = 0 is absorbing downward.  A link dead in both directions, or an
    upward-absorbing link above a cut, disconnects the chain.
    """
    u, d = _augmented_links(w_up, w_down, spin, gamma_dep_per_s)
    n = u.size + 1
    weights = np.zeros(n)
    weights[0] = 1.0
    cut_above = None
    for k in range(n - 1):
        if u[k] == 0.0 and d[k] == 0.0:
            raise FrozenSpinError(
                "frozen nuclear spin: both rates of a Zeeman link vanish")
        if d[k] == 0.0:
            if cut_above is not None:
                raise FrozenSpinError(
                    "frozen nuclear spin: absorbing level unreachable "
                    "across a one-way link")
            weights[:k + 1] = 0.0
            weights[k + 1] = 1.0
        elif u[k] == 0.0:
            cut_above = k
            weights[k + 1] = 0.0
        else:
            weights[k + 1] = weights[k] * (u[k] / d[k])
    total = weights.sum()
    return PolarizationState(populations=weights / total, spin=spin)


def polarization_trajectory(p0: float, p_ss: float, w_per_us: float,
                            t_us) -> np.ndarray:
    """Exact exponential relaxation p(t) = p_ss + (p0 - p_ss) e^(-W t)."""
    if w_per_us < 0:
        raise ValueError("relaxation rate must be non-negative")
    t = np.asarray(t_us, dtype=float)
    out = p_ss + (p0 - p_ss) * np.exp(-w_per_us * t)
    return out if out.ndim else float(out)


def pss_dipolar(theta: float) -> float:
    """Steady polarization of a pure dipolar site in the broad-line limit.

    p_ss = 2 c / (c^2 + 1) with c = 3 cos^2(theta) - 2; the form is the
    regularized 2/(c + 1/c), equal to 0 at c = 0.  Valid when the
    linewidth exceeds |Delta_N| (broad-linewidth limit); the caller is
    responsible for checking the regime.
    """
    c = 3.0 * math.cos(theta) ** 2 - 2.0
    return 2.0 * c / (c * c + 1.0)


def strong_hfi_check(a_dp_mhz: float, gamma_mhz: float,
                     gamma_dep_per_s: float) -> bool:
    """True when the dipolar coupling beats depolarization: A^2 >= 40 G g.

    The asymptotic condition A_dp^2 >> 4 Gamma gamma_dep is implemented
    with a factor-10 threshold, all quantities converted to angular 1/us
    (gamma_dep is a plain decay constant and picks up no 2 pi).
    """
    if a_dp_mhz < 0 or gamma_mhz < 0 or gamma_dep_per_s < 0:
        raise ValueError("inputs must be non-negative")
    a_ang = 2.0 * math.pi * a_dp_mhz
    gamma_ang = 2.0 * math.pi * gamma_mhz
    gdep = per_s_to_per_us(gamma_dep_per_s)
    return a_ang * a_ang >= 40.0 * gamma_ang * gdep


def markovian_validity(w_per_us: float, model: NvModel,
                       ) -> tuple[bool, float]:
    """Gate the rate theory: valid iff the DNP time 1/W is >= 10 tau_c.

    Returns (valid, ratio) with ratio = W * tau_c; W = 0 is trivially
    Markovian (ratio 0).
    """
    if w_per_us < 0:
        raise ValueError("rate must be non-negative")
    if w_per_us == 0.0:
        return True, 0.0
    ratio = w_per_us * correlation_time(model)
    return ratio <= 0.1, ratio


def dnp_steady(pair: RatePair, model: NvModel,
               gamma_dep_per_s: float = GAMMA_DEP_DEFAULT_PER_S,
               t_us=None, p0: float = 0.0) -> DnpResult:
    """Steady-state DNP of a spin-1/2 site from its rate pair.

    Composes the birth-death stationary state with the Markovianity gate;
    when a time grid is given the trajectory relaxes at w + 2 gamma_dep.
    """
    state = rate_equation_steady([pair.w_plus], [pair.w_minus], spin=0.5,
                                 gamma_dep_per_s=gamma_dep_per_s)
    valid, ratio = markovian_validity(pair.total, model)
    result = DnpResult(p_ss=state.polarization, w_plus=pair.w_plus,
                       w_minus=pair.w_minus,
                       gamma_dep_per_s=gamma_dep_per_s,
                       markovian_valid=valid, markovian_ratio=ratio)
    if t_us is None:
        return result
    t = np.asarray(t_us, dtype=float)
    p_t = polarization_trajectory(p0, result.p_ss, result.relaxation_rate, t)
    return DnpResult(p_ss=result.p_ss, w_plus=result.w_plus,
                     w_minus=result.w_minus,
                     gamma_dep_per_s=gamma_dep_per_s,
                     markovian_valid=valid, markovian_ratio=ratio,
                     t_us=t, p_t=np.atleast_1d(p_t))
