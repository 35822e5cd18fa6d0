# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: model values with fused Jacobians, and comb profiles.

Same contract as ``_kernels_py``; one pass over the abscissa per call.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, tanh, fabs, floor, ceil, sqrt

cnp.import_array()

cdef double MU_B_OVER_KB = 0.6717138
cdef double SECH_CLAMP = 350.0
cdef double GAUSS_CUTOFF_FWHM = 8.0


cdef inline double _sech2(double z) nogil:
    cdef double e
    if fabs(z) > SECH_CLAMP:
        return 0.0
    e = 2.0 / (exp(z) + exp(-z))
    return e * e


def mims(const double[::1] x, const double[::1] p):
    cdef Py_ssize_t i, n = x.shape[0]
    cdef double a0 = p[0], t2 = p[1], xs = p[2]
    cdef double u, logu, v, e, yi
    y_arr = np.empty(n)
    jac_arr = np.empty((n, 3))
    cdef double[::1] y = y_arr
    cdef double[:, ::1] jac = jac_arr
    with nogil:
        for i in range(n):
            u = 2.0 * x[i] / t2
            if u > 0:
                logu = log(u)
                v = exp(xs * logu)
            else:
                logu = 0.0
                v = 0.0
            e = exp(-v)
            yi = a0 * e
            y[i] = yi
            jac[i, 0] = e
            jac[i, 1] = yi * xs * v / t2
            jac[i, 2] = -yi * v * logu
    return y_arr, jac_arr


def gamma_t(const double[::1] x, const double[::1] p):
    cdef Py_ssize_t i, n = x.shape[0]
    cdef double g0 = p[0], amp = p[1], xi_half = p[2], a_tls = p[3], a_tpr = p[4]
    cdef double t, z, s, t2, t7
    y_arr = np.empty(n)
    jac_arr = np.empty((n, 5))
    cdef double[::1] y = y_arr
    cdef double[:, ::1] jac = jac_arr
    with nogil:
        for i in range(n):
            t = x[i]
            z = xi_half / t
            s = _sech2(z)
            t2 = t * t
            t7 = t2 * t2 * t2 * t
            y[i] = g0 + amp * s + a_tls * t + a_tpr * t7
            jac[i, 0] = 1.0
            jac[i, 1] = s
            jac[i, 2] = -2.0 * amp * s * tanh(z) / t
            jac[i, 3] = t
            jac[i, 4] = t7
    return y_arr, jac_arr


def gamma_b(const double[::1] x, const double[::1] p):
    cdef Py_ssize_t i, n = x.shape[0]
    cdef double g0 = p[0], amp = p[1], g_env = p[2], t_fixed = p[3]
    cdef double k = 0.5 * MU_B_OVER_KB
    cdef double z, s, dz
    y_arr = np.empty(n)
    jac_arr = np.empty((n, 4))
    cdef double[::1] y = y_arr
    cdef double[:, ::1] jac = jac_arr
    with nogil:
        for i in range(n):
            z = g_env * k * x[i] / t_fixed
            s = _sech2(z)
            dz = -2.0 * amp * s * tanh(z)
            y[i] = g0 + amp * s
            jac[i, 0] = 1.0
            jac[i, 1] = s
            jac[i, 2] = dz * k * x[i] / t_fixed
            jac[i, 3] = -dz * z / t_fixed
    return y_arr, jac_arr


def lorentzian(const double[::1] x, const double[::1] p):
    cdef Py_ssize_t i, n = x.shape[0]
    cdef double center = p[0], fwhm = p[1], peak = p[2], baseline = p[3]
    cdef double h = 0.5 * fwhm
    cdef double dx, den, den2, shape
    y_arr = np.empty(n)
    jac_arr = np.empty((n, 4))
    cdef double[::1] y = y_arr
    cdef double[:, ::1] jac = jac_arr
    with nogil:
        for i in range(n):
            dx = x[i] - center
            den = dx * dx + h * h
            den2 = den * den
            shape = h * h / den
            y[i] = baseline + peak * shape
            jac[i, 0] = peak * 2.0 * h * h * dx / den2
            jac[i, 1] = peak * h * dx * dx / den2
            jac[i, 2] = shape
            jac[i, 3] = 1.0
    return y_arr, jac_arr


def double_exp(const double[::1] x, const double[::1] p):
    cdef Py_ssize_t i, n = x.shape[0]
    cdef double a1 = p[0], a2 = p[1], tau1 = p[2], tau2 = p[3]
    cdef double e1, e2
    y_arr = np.empty(n)
    jac_arr = np.empty((n, 4))
    cdef double[::1] y = y_arr
    cdef double[:, ::1] jac = jac_arr
    with nogil:
        for i in range(n):
            e1 = exp(-x[i] / tau1)
            e2 = exp(-x[i] / tau2)
            y[i] = a1 * e1 + a2 * e2
            jac[i, 0] = e1
            jac[i, 1] = e2
            jac[i, 2] = a1 * e1 * x[i] / (tau1 * tau1)
            jac[i, 3] = a2 * e2 * x[i] / (tau2 * tau2)
    return y_arr, jac_arr


def comb_square(const double[::1] freq, double delta, double width,
                double k_lo, double k_hi, double depth, double background):
    cdef Py_ssize_t i, n = freq.shape[0]
    cdef double k, half = 0.5 * width
    out_arr = np.empty(n)
    cdef double[::1] out = out_arr
    with nogil:
        for i in range(n):
            k = floor(freq[i] / delta + 0.5)
            if k >= k_lo and k <= k_hi and fabs(freq[i] - k * delta) < half:
                out[i] = background + depth
            else:
                out[i] = background
    return out_arr


def comb_gauss(const double[::1] freq, double delta, double width,
               double k_lo, double k_hi, double depth, double background):
    cdef Py_ssize_t i, n = freq.shape[0]
    cdef double sigma = width / (2.0 * sqrt(2.0 * log(2.0)))
    cdef double cutoff = GAUSS_CUTOFF_FWHM * width
    cdef long m = <long>ceil(cutoff / delta) + 1
    cdef long j
    cdef double kc, k, off, acc, r
    out_arr = np.empty(n)
    cdef double[::1] out = out_arr
    with nogil:
        for i in range(n):
            kc = floor(freq[i] / delta + 0.5)
            acc = background
            for j in range(-m, m + 1):
                k = kc + j
                if k < k_lo or k > k_hi:
                    continue
                off = freq[i] - k * delta
                if fabs(off) > cutoff:
                    continue
                r = off / sigma
                acc = acc + depth * exp(-0.5 * r * r)
            out[i] = acc
    return out_arr
