"""Unit conventions used throughout the package.

User-facing quantities are ordinary frequencies in MHz, magnetic fields in
mT, nuclear gyromagnetic ratios in MHz/T, and externally supplied spin
relaxation rates in 1/s.  Internally every Hamiltonian matrix element and
every Lindblad decay constant is expressed in angular units (rad/us) with
time in us, so that exp(i*H*t) phases and exp(-gamma*t) decays share one
scale.  This module is the single place where conversions are defined;
builders call these helpers instead of scattering factors of 2*pi.

Rates returned by the rate-theory functions are angular decay constants in
1/us; the CLI converts them to 1/s for output.
"""

import math

TWO_PI = 2.0 * math.pi


def mhz_to_angular(f_mhz):
    """Ordinary frequency in MHz -> angular frequency in rad/us."""
    return TWO_PI * f_mhz


def angular_to_mhz(w_rad_per_us):
    """Angular frequency in rad/us -> ordinary frequency in MHz."""
    return w_rad_per_us / TWO_PI


def per_us_to_per_s(rate_per_us):
    """Decay constant 1/us -> 1/s.  No 2*pi: decay constants, not phases."""
    return rate_per_us * 1e6


def per_s_to_per_us(rate_per_s):
    """Decay constant 1/s -> 1/us."""
    return rate_per_s * 1e-6


def nuclear_zeeman_mhz(gamma_n_mhz_per_t, b_mt):
    """Nuclear Zeeman frequency gamma_n * B in MHz.

    gamma_n is conventionally tabulated in MHz/T while fields here are in
    mT, hence the 1e-3.
    """
    return gamma_n_mhz_per_t * b_mt * 1e-3
