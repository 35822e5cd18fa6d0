"""Pure-numpy kernels: model values with fused Jacobians, and comb profiles.

Mirrors ``_kernels.pyx`` function for function. Every model kernel takes a
1-D float64 abscissa ``x`` and a full parameter vector ``p`` and returns
``(y, jac)`` with ``jac`` of shape ``(len(x), len(p))``.
"""

import numpy as np

from .quantities import BOHR_MAGNETON_OVER_KB

SECH_CLAMP = 350.0
GAUSS_CUTOFF_FWHM = 8.0
_FWHM_TO_SIGMA = 1.0 / (2.0 * np.sqrt(2.0 * np.log(2.0)))


def sech2_tanh(z):
    """``sech²(z)`` and ``tanh(z)``; sech² is exactly 0 beyond ``|z| > 350``."""
    z = np.asarray(z, dtype=float)
    inside = np.abs(z) <= SECH_CLAMP
    zc = np.where(inside, z, 0.0)
    s = np.where(inside, (2.0 / (np.exp(zc) + np.exp(-zc))) ** 2, 0.0)
    return s, np.tanh(z)


def mims(x, p):
    a0, t2, xs = p
    u = 2.0 * x / t2
    pos = u > 0
    logu = np.log(np.where(pos, u, 1.0))
    v = np.where(pos, np.exp(xs * logu), 0.0)
    e = np.exp(-v)
    y = a0 * e
    jac = np.empty((x.size, 3))
    jac[:, 0] = e
    jac[:, 1] = y * xs * v / t2
    jac[:, 2] = -y * v * logu
    return y, jac


def gamma_t(x, p):
    g0, amp, xi_half, a_tls, a_tpr = p
    s, th = sech2_tanh(xi_half / x)
    x7 = x**7
    y = g0 + amp * s + a_tls * x + a_tpr * x7
    jac = np.empty((x.size, 5))
    jac[:, 0] = 1.0
    jac[:, 1] = s
    jac[:, 2] = -2.0 * amp * s * th / x
    jac[:, 3] = x
    jac[:, 4] = x7
    return y, jac


def gamma_b(x, p):
    g0, amp, g_env, t_fixed = p
    k = 0.5 * BOHR_MAGNETON_OVER_KB
    z = g_env * k * x / t_fixed
    s, th = sech2_tanh(z)
    dz = -2.0 * amp * s * th
    y = g0 + amp * s
    jac = np.empty((x.size, 4))
    jac[:, 0] = 1.0
    jac[:, 1] = s
    jac[:, 2] = dz * k * x / t_fixed
    jac[:, 3] = -dz * z / t_fixed
    return y, jac


def lorentzian(x, p):
    center, fwhm, peak, baseline = p
    h = 0.5 * fwhm
    dx = x - center
    den = dx * dx + h * h
    shape = h * h / den
    jac = np.empty((x.size, 4))
    jac[:, 0] = peak * 2.0 * h * h * dx / (den * den)
    jac[:, 1] = peak * h * dx * dx / (den * den)
    jac[:, 2] = shape
    jac[:, 3] = 1.0
    return baseline + peak * shape, jac


def double_exp(x, p):
    a1, a2, tau1, tau2 = p
    e1 = np.exp(-x / tau1)
    e2 = np.exp(-x / tau2)
    jac = np.empty((x.size, 4))
    jac[:, 0] = e1
    jac[:, 1] = e2
    jac[:, 2] = a1 * e1 * x / (tau1 * tau1)
    jac[:, 3] = a2 * e2 * x / (tau2 * tau2)
    return a1 * e1 + a2 * e2, jac


def comb_square(freq, delta, width, k_lo, k_hi, depth, background):
    """Square teeth of full width ``width`` on multiples ``k·delta``, k in [k_lo, k_hi]."""
    k = np.floor(freq / delta + 0.5)
    inside = (k >= k_lo) & (k <= k_hi) & (np.abs(freq - k * delta) < 0.5 * width)
    return np.where(inside, background + depth, background)


def comb_gauss(freq, delta, width, k_lo, k_hi, depth, background):
    """Gaussian teeth of FWHM ``width``; neighbours beyond 8 FWHM are dropped."""
    sigma = width * _FWHM_TO_SIGMA
    cutoff = GAUSS_CUTOFF_FWHM * width
    kc = np.floor(freq / delta + 0.5)
    m = int(np.ceil(cutoff / delta)) + 1
    out = np.full(freq.shape, float(background))
    for j in range(-m, m + 1):
        k = kc + j
        off = freq - k * delta
        use = (k >= k_lo) & (k <= k_hi) & (np.abs(off) <= cutoff)
        out += np.where(use, depth * np.exp(-0.5 * (off / sigma) ** 2), 0.0)
    return out
