"""Many-nucleus DNP: exact joint configuration chain and mean-field.

The joint Zeeman populations of N spin-1/2 nuclei form a birth-death
chain on the 2^N hypercube whose link rates are the golden-rule pair of
each nucleus evaluated at the spectator Overhauser shift (the flipping
nucleus's own longitudinal coupling already sits inside its mismatch, so
it is excluded from the shift).  exact_joint_steady solves that chain
directly for N <= 12; the mean-field tier factorizes the distribution
and averages each nucleus's rates over its spectators, either by exact
enumeration (small N), Gauss-Hermite quadrature against a Gaussian
approximation of the spectator field (large N), or Monte Carlo sampling
as a cross-check.

Rates are angular decay constants in 1/us; fields and couplings in MHz;
gamma_dep is quoted in 1/s at the API surface.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import sparse
from scipy.integrate import solve_ivp
from scipy.sparse.linalg import splu
from scipy.special import roots_hermite

from ._kernels import enum_pair, gh_pair
from .errors import NonConvergenceError, NumericalError
from .liouville import NvModel
from .physmodel import NucleusSite, delta_n
from .rates import (RatePair, golden_coefficients, golden_linewidth_mhz,
                    rate_pair_spin_half, weak_pump_ok)
from .singlespin import GAMMA_DEP_DEFAULT_PER_S
from .units import per_s_to_per_us

EXACT_JOINT_MAX_SITES = 12
GH_NODES_DEFAULT = 21
MC_SAMPLES_DEFAULT = 4000

_MEANFIELD_METHODS = ("auto", "enumerate", "gauss_hermite", "monte_carlo")


@dataclass(frozen=True)
class SpinEnsemble:
    """A set of nuclear sites with one polarization per site."""

    sites: tuple[NucleusSite, ...]
    polarizations: np.ndarray
    gamma_dep_per_s: float = GAMMA_DEP_DEFAULT_PER_S
    converged: bool = True
    iterations: int = 0
    residual: float = 0.0

    def __post_init__(self):
        sites = tuple(self.sites)
        object.__setattr__(self, "sites", sites)
        p = np.asarray(self.polarizations, dtype=float)
        if p.shape != (len(sites),):
            raise ValueError("one polarization per site required")
        if np.any(np.abs(p) > 1.0 + 1e-9):
            raise ValueError("polarizations must lie in [-1, 1]")
        p = np.clip(p, -1.0, 1.0)
        object.__setattr__(self, "polarizations", p)
        self.polarizations.setflags(write=False)

    def __len__(self) -> int:
        return len(self.sites)

    @property
    def p_bar(self) -> float:
        return float(self.polarizations.mean())


@dataclass(frozen=True)
class JointConfig:
    """One joint Zeeman configuration and its probability."""

    m: tuple[float, ...]
    probability: float


@dataclass(frozen=True)
class JointDistribution:
    """Stationary distribution over the 2^N joint Zeeman configurations.

    Configuration c has nucleus i in m_i = +1/2 when bit i of c is set.
    residual is the stationarity defect |G p|_inf relative to the largest
    total outflow rate of the chain.
    """

    probabilities: np.ndarray
    n_sites: int
    residual: float = 0.0

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float)
        if p.shape != (1 << self.n_sites,):
            raise ValueError("need one probability per configuration")
        if np.any(p < -1e-12):
            raise ValueError("configuration probabilities must be >= 0")
        if abs(p.sum() - 1.0) > 1e-9:
            raise ValueError("configuration probabilities must sum to one")
        p = np.clip(p, 0.0, None)
        object.__setattr__(self, "probabilities", p)
        self.probabilities.setflags(write=False)

    def _m_matrix(self) -> np.ndarray:
        c = np.arange(1 << self.n_sites, dtype=np.int64)
        bits = (c[:, None] >> np.arange(self.n_sites)[None, :]) & 1
        return bits - 0.5

    @property
    def polarizations(self) -> np.ndarray:
        """Per-site marginals p_i = 2 <I_z,i>."""
        return 2.0 * (self.probabilities @ self._m_matrix())

    def configs(self):
        """All configurations as JointConfig records, heaviest first."""
        m = self._m_matrix()
        order = np.argsort(self.probabilities)[::-1]
        return [JointConfig(m=tuple(m[c]), probability=float(
            self.probabilities[c])) for c in order]

    def overhauser_moments(self, sites) -> "OverhauserStats":
        """Exact mean and rms of the Overhauser field over the chain."""
        a = _a_zz_array(sites, self.n_sites)
        h = self._m_matrix() @ a
        mean = float(self.probabilities @ h)
        var = float(self.probabilities @ (h - mean) ** 2)
        return OverhauserStats(mean_mhz=mean, rms_mhz=math.sqrt(max(var, 0.0)))

    def as_ensemble(self, sites, gamma_dep_per_s: float) -> SpinEnsemble:
        return SpinEnsemble(sites=tuple(sites),
                            polarizations=self.polarizations,
                            gamma_dep_per_s=gamma_dep_per_s,
                            converged=True, residual=self.residual)


@dataclass(frozen=True)
class OverhauserStats:
    """Mean and rms fluctuation of the longitudinal Overhauser field."""

    mean_mhz: float
    rms_mhz: float

    def __post_init__(self):
        if self.rms_mhz < 0:
            raise ValueError("rms must be non-negative")


def _a_zz_array(sites, expected: int | None = None) -> np.ndarray:
    sites = tuple(sites)
    if expected is not None and len(sites) != expected:
        raise ValueError("site count mismatch")
    return np.array([s.ground_tensor.a_zz for s in sites], dtype=float)


def _require_spin_half(sites) -> tuple[NucleusSite, ...]:
    sites = tuple(sites)
    if not sites:
        raise ValueError("need at least one site")
    for s in sites:
        if s.spin != 0.5:
            raise ValueError("multispin tiers require spin-1/2 sites")
    return sites


def overhauser_field(m, sites) -> float:
    """Longitudinal Overhauser shift h = sum_i A_zz,i m_i in MHz."""
    m = np.asarray(m, dtype=float)
    a = _a_zz_array(sites)
    if m.shape != a.shape:
        raise ValueError("one projection per site required")
    return float(a @ m)


def overhauser_stats(ensemble: SpinEnsemble) -> OverhauserStats:
    """Factorized-ensemble Overhauser moments.

    mean = sum_i A_zz,i p_i / 2 and rms^2 = sum_i A_zz,i^2 (1 - p_i^2)/4,
    the exact moments of independent spin-1/2 nuclei at those
    polarizations.
    """
    a = _a_zz_array(ensemble.sites)
    p = ensemble.polarizations
    mean = float(a @ p) / 2.0
    var = float(a * a @ (1.0 - p * p)) / 4.0
    return OverhauserStats(mean_mhz=mean, rms_mhz=math.sqrt(max(var, 0.0)))


def conditional_rates(site: NucleusSite, h_mhz: float,
                      model: NvModel) -> RatePair:
    """Golden-rule pair of one nucleus at spectator Overhauser shift h.

    The detuning is replaced by Delta - h; at h = 0 this is exactly the
    bare rate_pair_spin_half of the site.
    """
    if site.spin != 0.5:
        raise ValueError("conditional_rates applies to spin-1/2 sites")
    t = site.ground_tensor
    dn = delta_n(model.b_mt, t.a_zz, site.gamma_n_mhz_per_t)
    return rate_pair_spin_half(model.detuning_mhz - h_mhz, dn,
                               golden_linewidth_mhz(model), model.p_ground,
                               t.a_plus_plus, t.a_plus_minus)


def _golden_pieces(model: NvModel, sites):
    coef_p = np.empty(len(sites))
    coef_m = np.empty(len(sites))
    x_p = np.empty(len(sites))
    x_m = np.empty(len(sites))
    for i, site in enumerate(sites):
        coef_p[i], coef_m[i], x_p[i], x_m[i], _ = golden_coefficients(
            model, site)
    return coef_p, coef_m, x_p, x_m, golden_linewidth_mhz(model)


def exact_joint_steady(sites, model: NvModel,
                       gamma_dep_per_s: float = GAMMA_DEP_DEFAULT_PER_S,
                       ) -> JointDistribution:
    """Stationary distribution of the joint 2^N Zeeman chain.

    Link rates: nucleus i flips up out of configuration c at
    W_{i,+}(h_spec) + gamma_dep with h_spec the Overhauser shift of the
    other nuclei in c, and down in reverse at W_{i,-}(h_spec) +
    gamma_dep.  The sparse generator is LU-factorized with one row
    replaced by the normalization; two refinement passes push the
    stationarity residual below 1e-10.
    """
    sites = _require_spin_half(sites)
    n = len(sites)
    if n > EXACT_JOINT_MAX_SITES:
        raise ValueError(
            f"exact joint chain capped at {EXACT_JOINT_MAX_SITES} sites, "
            f"got {n}")
    if gamma_dep_per_s < 0:
        raise ValueError("gamma_dep_per_s must be non-negative")
    coef_p, coef_m, x_p, x_m, gamma = _golden_pieces(model, sites)
    a_zz = _a_zz_array(sites)
    gdep = per_s_to_per_us(gamma_dep_per_s)

    nconf = 1 << n
    configs = np.arange(nconf, dtype=np.int64)
    bits = (configs[:, None] >> np.arange(n)[None, :]) & 1
    m = bits - 0.5
    h_all = m @ a_zz

    g_ang = 2.0 * math.pi * gamma
    rows = []
    cols = []
    data = []
    diag = np.zeros(nconf)
    for i in range(n):
        low = configs[bits[:, i] == 0]
        high = low + (1 << i)
        h_spec = h_all[low] + 0.5 * a_zz[i]
        dp = 2.0 * math.pi * (x_p[i] - h_spec)
        dm = 2.0 * math.pi * (x_m[i] - h_spec)
        w_up = coef_p[i] * (g_ang / math.pi) / (dp * dp + g_ang
                                                * g_ang) + gdep
        w_dn = coef_m[i] * (g_ang / math.pi) / (dm * dm + g_ang
                                                * g_ang) + gdep
        rows.append(high)
        cols.append(low)
        data.append(w_up)
        rows.append(low)
        cols.append(high)
        data.append(w_dn)
        np.add.at(diag, low, -w_up)
        np.add.at(diag, high, -w_dn)
    rows.append(configs)
    cols.append(configs)
    data.append(diag)
    gen = sparse.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(nconf, nconf)).tocsr()

    scale = float(np.max(-diag))
    if scale <= 0.0:
        raise NumericalError("joint chain has no transitions at all "
                             "(all rates and gamma_dep zero)")
    a = (gen / scale).tolil()
    a[0, :] = np.ones(nconf)
    a = a.tocsc()
    b = np.zeros(nconf)
    b[0] = 1.0
    lu = splu(a)
    p = lu.solve(b)
    for _ in range(2):
        p += lu.solve(b - a @ p)
    if not np.all(np.isfinite(p)):
        raise NumericalError("joint steady-state solve returned "
                             "non-finite values")
    if np.min(p) < -1e-10:
        raise NumericalError(
            f"joint steady state has negative weight {np.min(p):.3e}")
    p = np.clip(p, 0.0, None)
    p /= p.sum()
    residual = float(np.max(np.abs(gen @ p))) / scale
    if residual > 1e-10:
        raise NumericalError(
            f"joint chain stationarity residual {residual:.3e} exceeds "
            "1e-10")
    return JointDistribution(probabilities=p, n_sites=n, residual=residual)


@lru_cache(maxsize=8)
def _gh_rule(nodes: int):
    x, w = roots_hermite(nodes)
    return np.ascontiguousarray(x), np.ascontiguousarray(w)


def _resolve_method(method: str, n: int) -> str:
    if method not in _MEANFIELD_METHODS:
        raise ValueError(f"unknown spectator-average method {method!r}")
    if method == "auto":
        return "enumerate" if n <= EXACT_JOINT_MAX_SITES else "gauss_hermite"
    return method


def _spectator_moments(a_zz, p):
    """Self-excluded Gaussian moments of the spectator field, per site.

    mu_i = sum_{j != i} A_zz,j p_j / 2 and
    sigma_i^2 = sum_{j != i} A_zz,j^2 (1 - p_j^2) / 4.
    """
    mean_all = float(a_zz @ p) / 2.0
    var_all = float(a_zz * a_zz @ (1.0 - p * p)) / 4.0
    mu = mean_all - a_zz * p / 2.0
    var = var_all - a_zz * a_zz * (1.0 - p * p) / 4.0
    return mu, np.sqrt(np.clip(var, 0.0, None))


def _mc_spectator_average(coef_p, coef_m, x_p, x_m, gamma, a_spec, p_spec,
                          rng, samples):
    up = rng.random((samples, a_spec.size)) < (1.0 + p_spec) / 2.0
    h = (up - 0.5) @ a_spec
    g = 2.0 * math.pi * gamma
    dp = 2.0 * math.pi * (x_p - h)
    dm = 2.0 * math.pi * (x_m - h)
    w_p = coef_p * np.mean((g / math.pi) / (dp * dp + g * g))
    w_m = coef_m * np.mean((g / math.pi) / (dm * dm + g * g))
    return float(w_p), float(w_m)


def meanfield_rates(sites, i: int, polarizations, model: NvModel,
                    method: str = "auto", nodes: int = GH_NODES_DEFAULT,
                    rng=None, samples: int = MC_SAMPLES_DEFAULT) -> RatePair:
    """Rate pair of nucleus i averaged over its factorized spectators.

    The spectator Overhauser field (self excluded) is averaged by exact
    enumeration when N <= 12, by Gauss-Hermite quadrature against its
    Gaussian approximation otherwise, or by Monte Carlo sampling as a
    cross-check (method="monte_carlo").
    """
    sites = _require_spin_half(sites)
    n = len(sites)
    if not 0 <= i < n:
        raise ValueError("site index out of range")
    p = np.asarray(polarizations, dtype=float)
    if p.shape != (n,):
        raise ValueError("one polarization per site required")
    if np.any(np.abs(p) > 1.0 + 1e-9):
        raise ValueError("polarizations must lie in [-1, 1]")
    method = _resolve_method(method, n)
    coef_p, coef_m, x_p, x_m, gamma = golden_coefficients(model, sites[i])
    a_zz = _a_zz_array(sites)
    spec = np.arange(n) != i
    a_spec = a_zz[spec]
    p_spec = p[spec]

    if method == "enumerate":
        w_p, w_m = enum_pair(coef_p, coef_m, x_p, x_m, gamma, a_spec, p_spec)
        mu = float(a_spec @ p_spec) / 2.0
    elif method == "gauss_hermite":
        mu = float(a_spec @ p_spec) / 2.0
        var = float(a_spec * a_spec @ (1.0 - p_spec * p_spec)) / 4.0
        gx, gw = _gh_rule(nodes)
        wp_arr, wm_arr = gh_pair(
            np.array([coef_p]), np.array([coef_m]), np.array([x_p]),
            np.array([x_m]), gamma, np.array([mu]),
            np.array([math.sqrt(var)]), gx, gw)
        w_p, w_m = float(wp_arr[0]), float(wm_arr[0])
    else:
        rng = np.random.default_rng(0) if rng is None else rng
        mu = float(a_spec @ p_spec) / 2.0
        w_p, w_m = _mc_spectator_average(coef_p, coef_m, x_p, x_m, gamma,
                                         a_spec, p_spec, rng, samples)
    return RatePair(w_plus=w_p, w_minus=w_m, method="meanfield",
                    mismatch_plus_mhz=x_p - mu, mismatch_minus_mhz=x_m - mu,
                    b_mt=model.b_mt, weak_pump_ok=weak_pump_ok(model))


def _wbar_all(pieces, a_zz, p, method, nodes, rng, samples):
    """Spectator-averaged rate pairs for every site at polarizations p."""
    coef_p, coef_m, x_p, x_m, gamma = pieces
    n = a_zz.size
    if method == "enumerate":
        w_p = np.empty(n)
        w_m = np.empty(n)
        idx = np.arange(n)
        for i in range(n):
            spec = idx != i
            w_p[i], w_m[i] = enum_pair(coef_p[i], coef_m[i], x_p[i], x_m[i],
                                       gamma, a_zz[spec], p[spec])
        return w_p, w_m
    if method == "gauss_hermite":
        mu, sigma = _spectator_moments(a_zz, p)
        gx, gw = _gh_rule(nodes)
        return gh_pair(coef_p, coef_m, x_p, x_m, gamma, mu, sigma, gx, gw)
    w_p = np.empty(n)
    w_m = np.empty(n)
    idx = np.arange(n)
    for i in range(n):
        spec = idx != i
        w_p[i], w_m[i] = _mc_spectator_average(
            coef_p[i], coef_m[i], x_p[i], x_m[i], gamma, a_zz[spec],
            p[spec], rng, samples)
    return w_p, w_m


def meanfield_fixed_point(sites, model: NvModel,
                          gamma_dep_per_s: float = GAMMA_DEP_DEFAULT_PER_S,
                          p_init=None, damping: float = 0.5,
                          tol: float = 1e-6, max_iter: int = 10000,
                          method: str = "auto",
                          nodes: int = GH_NODES_DEFAULT, rng=None,
                          samples: int = MC_SAMPLES_DEFAULT) -> SpinEnsemble:
    """Damped Jacobi iteration of the factorized stationarity conditions.

    Each sweep evaluates every site's spectator-averaged pair at the
    current polarizations (order-independent) and moves p a damping
    fraction toward (W+ - W-)/(W+ + W- + 2 gamma_dep).  The undamped
    residual is checked before the update, so a converged input returns
    unchanged.  Non-convergence raises with the last residual and
    iterate attached.
    """
    sites = _require_spin_half(sites)
    n = len(sites)
    if gamma_dep_per_s < 0:
        raise ValueError("gamma_dep_per_s must be non-negative")
    if not 0.0 < damping <= 1.0:
        raise ValueError("damping must lie in (0, 1]")
    method = _resolve_method(method, n)
    if method == "monte_carlo" and rng is None:
        rng = np.random.default_rng(0)
    pieces = _golden_pieces(model, sites)
    a_zz = _a_zz_array(sites)
    gdep = per_s_to_per_us(gamma_dep_per_s)
    p = np.zeros(n) if p_init is None else np.array(p_init, dtype=float)
    if p.shape != (n,):
        raise ValueError("p_init must hold one polarization per site")
    if np.any(np.abs(p) > 1.0 + 1e-9):
        raise ValueError("p_init must lie in [-1, 1]")

    residual = math.inf
    for iteration in range(max_iter + 1):
        w_p, w_m = _wbar_all(pieces, a_zz, p, method, nodes, rng, samples)
        denom = w_p + w_m + 2.0 * gdep
        target = np.where(denom > 0.0, (w_p - w_m)
                          / np.where(denom > 0.0, denom, 1.0), p)
        residual = float(np.max(np.abs(target - p)))
        if residual < tol:
            return SpinEnsemble(sites=sites, polarizations=p,
                                gamma_dep_per_s=gamma_dep_per_s,
                                converged=True, iterations=iteration,
                                residual=residual)
        if iteration == max_iter:
            break
        p = p + damping * (target - p)
    raise NonConvergenceError(
        f"mean-field fixed point not converged after {max_iter} "
        f"iterations (residual {residual:.3e})", residual=residual,
        iterations=max_iter, iterate=p)


@dataclass(frozen=True)
class MeanfieldTrajectory:
    """Time series of the mean-field polarizations, one row per time."""

    t_us: np.ndarray
    polarizations: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t_us, dtype=float)
        p = np.asarray(self.polarizations, dtype=float)
        if p.ndim != 2 or p.shape[0] != t.size:
            raise ValueError("polarizations must be (len(t), n_sites)")
        object.__setattr__(self, "t_us", t)
        object.__setattr__(self, "polarizations", p)

    @property
    def p_bar(self) -> np.ndarray:
        return self.polarizations.mean(axis=1)

    @property
    def final(self) -> np.ndarray:
        return self.polarizations[-1]


def meanfield_dynamics(sites, model: NvModel, p_init, t_us,
                       gamma_dep_per_s: float = GAMMA_DEP_DEFAULT_PER_S,
                       method: str = "auto",
                       nodes: int = GH_NODES_DEFAULT, rng=None,
                       samples: int = MC_SAMPLES_DEFAULT,
                       freeze_spectators: bool = False,
                       ) -> MeanfieldTrajectory:
    """Integrate dp_i/dt = (W+ - W-) - (W+ + W- + 2 gamma_dep) p_i.

    The spectator-averaged rates track p(t) self-consistently unless
    freeze_spectators is set, in which case they stay at their p_init
    values and every p_i(t) is a pure exponential.
    """
    sites = _require_spin_half(sites)
    n = len(sites)
    method = _resolve_method(method, n)
    if method == "monte_carlo" and rng is None:
        rng = np.random.default_rng(0)
    t = np.asarray(t_us, dtype=float)
    if t.ndim != 1 or t.size < 2 or np.any(np.diff(t) <= 0):
        raise ValueError("t_us must be a strictly increasing grid of at "
                         "least two times")
    p0 = np.asarray(p_init, dtype=float)
    if p0.shape != (n,):
        raise ValueError("p_init must hold one polarization per site")
    pieces = _golden_pieces(model, sites)
    a_zz = _a_zz_array(sites)
    gdep = per_s_to_per_us(gamma_dep_per_s)

    if freeze_spectators:
        w_p0, w_m0 = _wbar_all(pieces, a_zz, p0, method, nodes, rng, samples)

        def rhs(_t, p):
            return (w_p0 - w_m0) - (w_p0 + w_m0 + 2.0 * gdep) * p
    else:
        def rhs(_t, p):
            w_p, w_m = _wbar_all(pieces, a_zz, np.clip(p, -1.0, 1.0),
                                 method, nodes, rng, samples)
            return (w_p - w_m) - (w_p + w_m + 2.0 * gdep) * p

    sol = solve_ivp(rhs, (t[0], t[-1]), p0, t_eval=t, method="LSODA",
                    rtol=1e-8, atol=1e-12)
    if not sol.success:
        raise NumericalError(f"mean-field integration failed: {sol.message}")
    return MeanfieldTrajectory(t_us=t, polarizations=sol.y.T)


@dataclass(frozen=True)
class SpatialReport:
    """Per-site positions and polarizations plus radius-binned means."""

    records: np.ndarray = field(repr=False)
    bin_edges_a: np.ndarray
    bin_mean_p: np.ndarray
    bin_count: np.ndarray


def spatial_report(ensemble: SpinEnsemble, bin_edges_a=None) -> SpatialReport:
    """Tabulate (x, y, z, r, theta, p) per site and bin mean p by radius.

    Default bins are 5 A wide from 0 to just past the farthest site.
    Empty bins report a NaN mean.
    """
    n = len(ensemble)
    records = np.zeros(n, dtype=[("x_a", float), ("y_a", float),
                                 ("z_a", float), ("r_a", float),
                                 ("theta_rad", float), ("p", float)])
    for i, site in enumerate(ensemble.sites):
        x, y, z = site.position_a
        records[i] = (x, y, z, site.r, site.theta,
                      ensemble.polarizations[i])
    if bin_edges_a is None:
        top = 5.0 * math.ceil(float(records["r_a"].max()) / 5.0 + 1e-12)
        bin_edges_a = np.arange(0.0, max(top, 5.0) + 1e-9, 5.0)
    edges = np.asarray(bin_edges_a, dtype=float)
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
        raise ValueError("bin edges must be strictly increasing")
    which = np.digitize(records["r_a"], edges) - 1
    nbins = edges.size - 1
    mean_p = np.full(nbins, np.nan)
    count = np.zeros(nbins, dtype=int)
    for b in range(nbins):
        sel = which == b
        count[b] = int(sel.sum())
        if count[b]:
            mean_p[b] = float(records["p"][sel].mean())
    return SpatialReport(records=records, bin_edges_a=edges,
                         bin_mean_p=mean_p, bin_count=count)
