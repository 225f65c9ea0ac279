"""Timing comparison of the numba and numpy multispin kernels.

Usage: python3 benchmarks/bench_kernels.py

The package dispatches its two hot kernels (the Gauss-Hermite spectator
average and the exact spectator enumeration) to numba-compiled loops by
default and to vectorized numpy when DNPNV_DISABLE_NUMBA is set.  The
flag is read at call time, so this script times both backends in one
process by toggling the environment variable, on the same workloads the
mean-field solver runs in production: the 393-site natural-abundance
bath for the quadrature kernel and a 2^11-configuration enumeration for
the exact kernel.  It ends with an end-to-end mean-field field sweep
under each backend.
"""

import os
import time

import numpy as np

from dnpnv import nv_model, sample_lattice
from dnpnv._kernels import (active_backend, enum_pair, gh_pair,
                            numba_available)
from dnpnv.multispin import meanfield_fixed_point
from dnpnv.rates import golden_coefficients, golden_linewidth_mhz


def best_of(fn, repeats=5):
    """Minimum wall time of repeats calls, in seconds."""
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def timed_under(backend, fn, repeats=5):
    """best_of(fn) with the kernel dispatch pinned to one backend."""
    old = os.environ.get("DNPNV_DISABLE_NUMBA")
    os.environ["DNPNV_DISABLE_NUMBA"] = "1" if backend == "numpy" else "0"
    try:
        assert active_backend() == backend
        fn()  # warm-up: triggers JIT compilation on the numba path
        return best_of(fn, repeats)
    finally:
        if old is None:
            os.environ.pop("DNPNV_DISABLE_NUMBA", None)
        else:
            os.environ["DNPNV_DISABLE_NUMBA"] = old


def report(name, calls, t_numba, t_numpy):
    per_nb = t_numba / calls
    per_np = t_numpy / calls
    print(f"{name:34s} numba {per_nb * 1e6:9.1f} us/call   "
          f"numpy {per_np * 1e6:9.1f} us/call   "
          f"ratio numpy/numba {per_np / per_nb:5.2f}x")


def main():
    if not numba_available():
        raise SystemExit("numba is not importable; nothing to compare")

    sites = sample_lattice(11, 3.0, 36.5, 0.011)
    model = nv_model(102.4, rate_mhz=0.2, levels="five")
    n = len(sites)
    print(f"workload: {n}-site bath at B = {model.b_mt} mT, "
          f"R = 0.2 MHz\n")

    coef_p = np.empty(n)
    coef_m = np.empty(n)
    x_p = np.empty(n)
    x_m = np.empty(n)
    for i, site in enumerate(sites):
        coef_p[i], coef_m[i], x_p[i], x_m[i], _ = golden_coefficients(
            model, site)
    gamma = golden_linewidth_mhz(model)
    a_zz = np.array([s.ground_tensor.a_zz for s in sites])

    rng = np.random.default_rng(3)
    p = rng.uniform(-0.9, 0.9, size=n)
    mu = (a_zz @ p - a_zz * p) / 2.0
    var = ((a_zz * a_zz) @ (1.0 - p * p)
           - a_zz * a_zz * (1.0 - p * p)) / 4.0
    sigma = np.sqrt(var)
    gx, gw = np.polynomial.hermite.hermgauss(21)

    loops = 200
    def run_gh():
        for _ in range(loops):
            gh_pair(coef_p, coef_m, x_p, x_m, gamma, mu, sigma, gx, gw)

    t_nb = timed_under("numba", run_gh)
    t_np = timed_under("numpy", run_gh)
    out_nb = None

    def capture(backend):
        old = os.environ.get("DNPNV_DISABLE_NUMBA")
        os.environ["DNPNV_DISABLE_NUMBA"] = "1" if backend == "numpy" else "0"
        try:
            return gh_pair(coef_p, coef_m, x_p, x_m, gamma, mu, sigma,
                           gx, gw)
        finally:
            if old is None:
                os.environ.pop("DNPNV_DISABLE_NUMBA", None)
            else:
                os.environ["DNPNV_DISABLE_NUMBA"] = old

    wp_nb, wm_nb = capture("numba")
    wp_np, wm_np = capture("numpy")
    # sites on the symmetry axis have exactly zero rates on both
    # backends; guard the denominator so they compare as equal
    agree = max(
        np.max(np.abs(wp_nb - wp_np) / np.maximum(np.abs(wp_np), 1e-300)),
        np.max(np.abs(wm_nb - wm_np) / np.maximum(np.abs(wm_np), 1e-300)))
    report(f"gh_pair ({n} sites x 21 nodes)", loops, t_nb, t_np)

    # exact enumeration over 11 spectators (2048 configurations), the
    # per-site cost of an exact-tier mean-field sweep at the 12-site cap
    a_spec = a_zz[:11]
    p_spec = p[:11]
    eloops = 100
    def run_enum():
        for _ in range(eloops):
            for i in range(12):
                enum_pair(coef_p[i], coef_m[i], x_p[i], x_m[i], gamma,
                          a_spec, p_spec)

    t_nb_e = timed_under("numba", run_enum)
    t_np_e = timed_under("numpy", run_enum)
    report("enum_pair (12 x 2^11 configs)", eloops * 12, t_nb_e, t_np_e)

    # end-to-end: warm-started mean-field sweep over 81 field points
    def run_sweep():
        p_warm = np.zeros(n)
        for b in np.linspace(102.0, 102.8, 81):
            m = nv_model(b, rate_mhz=0.2, levels="five")
            ens = meanfield_fixed_point(sites, m, gamma_dep_per_s=1.0,
                                        p_init=p_warm)
            p_warm = ens.polarizations

    t_nb_s = timed_under("numba", run_sweep, repeats=3)
    t_np_s = timed_under("numpy", run_sweep, repeats=3)
    print(f"{'meanfield sweep (81 points)':34s} "
          f"numba {t_nb_s:9.3f} s        "
          f"numpy {t_np_s:9.3f} s        "
          f"ratio numpy/numba {t_np_s / t_nb_s:5.2f}x")
    print(f"\nbackend agreement (gh_pair, max rel diff): {agree:.2e}")


if __name__ == "__main__":
    main()
