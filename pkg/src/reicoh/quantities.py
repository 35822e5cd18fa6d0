"""Physical constants and unit conversions.

Every module exchanges values in one canonical set of units:

=================  =====
temperature        K
magnetic field     T
time               µs  (hole-burning lifetimes: hours)
linewidth          kHz
optical frequency  GHz
wavelength         nm
=================  =====

Conversion to and from anything else happens only in :mod:`reicoh.io`.
"""

from __future__ import annotations

import math

import numpy as np

#: Bohr magneton over Boltzmann constant, K/T.
BOHR_MAGNETON_OVER_KB = 0.6717138
#: Speed of light, m/s.
SPEED_OF_LIGHT = 299792458.0
#: Speed of light in nm·GHz (numerically equal to m/s).
SPEED_OF_LIGHT_NM_GHZ = SPEED_OF_LIGHT


class DomainError(ValueError):
    """An argument lies outside the domain of a physical relation."""


def _check_positive(name, value):
    arr = np.asarray(value, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError(f"{name} must be > 0, got {value!r}")
    return arr


def _check_nonnegative(name, value):
    arr = np.asarray(value, dtype=float)
    if np.any(~(arr >= 0)):
        raise DomainError(f"{name} must be >= 0, got {value!r}")
    return arr


def _scalar_or_array(arr):
    return float(arr) if arr.ndim == 0 else arr


def t2_to_gamma_h(t2_us):
    """Homogeneous linewidth (kHz) from an optical coherence time (µs).

    ``Γ_h = 1 / (π T₂)``; with T₂ in µs the result is ``10³ / (π T₂)`` kHz.
    """
    t2 = _check_positive("t2", t2_us)
    return _scalar_or_array(1e3 / (math.pi * t2))


def gamma_h_to_t2(gamma_khz):
    """Inverse of :func:`t2_to_gamma_h`: coherence time in µs."""
    g = _check_positive("gamma_h", gamma_khz)
    return _scalar_or_array(1e3 / (math.pi * g))


def wavelength_to_frequency(wavelength_nm):
    """Vacuum wavelength (nm) to optical frequency (GHz)."""
    lam = _check_positive("wavelength", wavelength_nm)
    return _scalar_or_array(SPEED_OF_LIGHT_NM_GHZ / lam)


def frequency_to_wavelength(frequency_ghz):
    """Optical frequency (GHz) to vacuum wavelength (nm)."""
    nu = _check_positive("frequency", frequency_ghz)
    return _scalar_or_array(SPEED_OF_LIGHT_NM_GHZ / nu)


def zeeman_half_splitting(g_env, field_t):
    """Half the Zeeman splitting of a perturbing centre, in kelvin.

    Returns ``ξ / 2k_B = g_env · (μ_B/k_B) · B / 2`` for an effective g-factor
    and a field in tesla.
    """
    g = _check_nonnegative("g_env", g_env)
    b = _check_nonnegative("B", field_t)
    return _scalar_or_array(g * BOHR_MAGNETON_OVER_KB * b / 2.0)
