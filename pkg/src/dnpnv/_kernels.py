"""Hot numeric kernels for the spectator-averaged rates.

Each kernel exists twice: a plain numpy implementation and a numba-jitted
loop version.  Dispatch happens at call time through the environment flag
DNPNV_DISABLE_NUMBA (set to 1/true/yes to force the numpy path), so the
same process can be benchmarked both ways.

All kernels work on golden-rule pieces as produced by
rates.golden_coefficients: coefficients in angular 1/us, Lorentzian
centers x and half-width gamma in MHz, and the Overhauser shift h in MHz.
The Lorentzian is evaluated in angular units, W(h) = coef * (g/pi) /
((2 pi (x - h))^2 + g^2) with g = 2 pi gamma, so the result is 1/us.
"""

from __future__ import annotations

import math
import os

import numpy as np

try:
    from numba import njit as _njit
except ImportError:  # pragma: no cover - numba is an install requirement
    _njit = None

_TRUTHY = ("1", "true", "yes", "on")


def numba_available() -> bool:
    return _njit is not None


def _use_numba() -> bool:
    if _njit is None:
        return False
    return os.environ.get("DNPNV_DISABLE_NUMBA", "").lower() not in _TRUTHY


def active_backend() -> str:
    """Backend the kernels will dispatch to right now."""
    return "numba" if _use_numba() else "numpy"


def gh_pair_numpy(coef_p, coef_m, x_p, x_m, gamma_mhz, mu, sigma,
                  nodes, weights):
    """Gauss-Hermite spectator average of the rate pair, all sites at once.

    For each site i the shift h is Gaussian with mean mu[i] and standard
    deviation sigma[i]; nodes and weights are the physicists'
    Gauss-Hermite rule.  Returns (w_plus, w_minus) arrays in 1/us.
    """
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    h = mu[:, None] + math.sqrt(2.0) * sigma[:, None] * nodes[None, :]
    g = 2.0 * math.pi * gamma_mhz
    wnorm = weights / math.sqrt(math.pi)
    dp = 2.0 * math.pi * (np.asarray(x_p, dtype=float)[:, None] - h)
    dm = 2.0 * math.pi * (np.asarray(x_m, dtype=float)[:, None] - h)
    lor_p = (g / math.pi) / (dp * dp + g * g)
    lor_m = (g / math.pi) / (dm * dm + g * g)
    return (np.asarray(coef_p, dtype=float) * (lor_p @ wnorm),
            np.asarray(coef_m, dtype=float) * (lor_m @ wnorm))


def _gh_pair_loops(coef_p, coef_m, x_p, x_m, gamma_mhz, mu, sigma,
                   nodes, weights):
    n = mu.shape[0]
    k = nodes.shape[0]
    g = 2.0 * math.pi * gamma_mhz
    gg = g * g
    pref = g / math.pi / math.sqrt(math.pi)
    w_plus = np.empty(n)
    w_minus = np.empty(n)
    root2 = math.sqrt(2.0)
    for i in range(n):
        acc_p = 0.0
        acc_m = 0.0
        for q in range(k):
            h = mu[i] + root2 * sigma[i] * nodes[q]
            dp = 2.0 * math.pi * (x_p[i] - h)
            dm = 2.0 * math.pi * (x_m[i] - h)
            acc_p += weights[q] / (dp * dp + gg)
            acc_m += weights[q] / (dm * dm + gg)
        w_plus[i] = coef_p[i] * pref * acc_p
        w_minus[i] = coef_m[i] * pref * acc_m
    return w_plus, w_minus


def enum_pair_numpy(coef_p, coef_m, x_p, x_m, gamma_mhz, a_spec, p_spec):
    """Exact spectator-enumeration average for one site.

    a_spec/p_spec hold the spectators' A_zz (MHz) and polarizations; all
    2^len configurations are enumerated with factorized probabilities
    (1 +- p_j)/2.  Returns (w_plus, w_minus) floats in 1/us.
    """
    a_spec = np.asarray(a_spec, dtype=float)
    p_spec = np.asarray(p_spec, dtype=float)
    n = a_spec.size
    masks = np.arange(1 << n, dtype=np.int64)
    bits = (masks[:, None] >> np.arange(n)[None, :]) & 1
    m = bits - 0.5
    prob = np.prod(0.5 * (1.0 + (2.0 * m) * p_spec[None, :]), axis=1)
    h = m @ a_spec
    g = 2.0 * math.pi * gamma_mhz
    dp = 2.0 * math.pi * (x_p - h)
    dm = 2.0 * math.pi * (x_m - h)
    lor_p = (g / math.pi) / (dp * dp + g * g)
    lor_m = (g / math.pi) / (dm * dm + g * g)
    return (float(coef_p * (prob @ lor_p)), float(coef_m * (prob @ lor_m)))


def _enum_pair_loops(coef_p, coef_m, x_p, x_m, gamma_mhz, a_spec, p_spec):
    n = a_spec.shape[0]
    g = 2.0 * math.pi * gamma_mhz
    gg = g * g
    acc_p = 0.0
    acc_m = 0.0
    for mask in range(1 << n):
        prob = 1.0
        h = 0.0
        for j in range(n):
            if (mask >> j) & 1:
                prob *= 0.5 * (1.0 + p_spec[j])
                h += 0.5 * a_spec[j]
            else:
                prob *= 0.5 * (1.0 - p_spec[j])
                h -= 0.5 * a_spec[j]
        dp = 2.0 * math.pi * (x_p - h)
        dm = 2.0 * math.pi * (x_m - h)
        acc_p += prob / (dp * dp + gg)
        acc_m += prob / (dm * dm + gg)
    pref = g / math.pi
    return coef_p * pref * acc_p, coef_m * pref * acc_m


if _njit is not None:
    gh_pair_numba = _njit(cache=True)(_gh_pair_loops)
    enum_pair_numba = _njit(cache=True)(_enum_pair_loops)
else:  # pragma: no cover
    gh_pair_numba = None
    enum_pair_numba = None


def gh_pair(coef_p, coef_m, x_p, x_m, gamma_mhz, mu, sigma, nodes, weights):
    """Dispatching wrapper around the Gauss-Hermite kernel."""
    args = [np.ascontiguousarray(a, dtype=float)
            for a in (coef_p, coef_m, x_p, x_m)]
    mu = np.ascontiguousarray(mu, dtype=float)
    sigma = np.ascontiguousarray(sigma, dtype=float)
    nodes = np.ascontiguousarray(nodes, dtype=float)
    weights = np.ascontiguousarray(weights, dtype=float)
    if _use_numba():
        return gh_pair_numba(*args, float(gamma_mhz), mu, sigma,
                             nodes, weights)
    return gh_pair_numpy(*args, float(gamma_mhz), mu, sigma, nodes, weights)


def enum_pair(coef_p, coef_m, x_p, x_m, gamma_mhz, a_spec, p_spec):
    """Dispatching wrapper around the enumeration kernel (one site)."""
    a_spec = np.ascontiguousarray(a_spec, dtype=float)
    p_spec = np.ascontiguousarray(p_spec, dtype=float)
    if _use_numba():
        w_p, w_m = enum_pair_numba(float(coef_p), float(coef_m), float(x_p),
                                   float(x_m), float(gamma_mhz), a_spec,
                                   p_spec)
        return float(w_p), float(w_m)
    return enum_pair_numpy(float(coef_p), float(coef_m), float(x_p),
                           float(x_m), float(gamma_mhz), a_spec, p_spec)
