"""Compiled kernels for the position block; mirrors reference.py exactly."""

import numpy as np

from libc.math cimport cos, log, sin, sqrt


cdef double LN2 = 0.6931471805599453094


cdef inline double _abs2(double complex z) nogil:
    return z.real * z.real + z.imag * z.imag


cdef inline double _re_conj_mul(double complex a, double complex b) nogil:
    # Re{conj(a) * b}
    return a.real * b.real + a.imag * b.imag


def channel_rows(object x_in, object freqs_in, object coeffs_in):
    """Composite rows h_k^H at positions x from the ray decomposition, (K, M)."""
    cdef double[::1] x = np.ascontiguousarray(x_in, dtype=np.float64)
    cdef double[:, ::1] freqs = np.ascontiguousarray(freqs_in, dtype=np.float64)
    cdef double complex[:, ::1] coeffs = np.ascontiguousarray(coeffs_in, dtype=np.complex128)
    cdef Py_ssize_t kk = freqs.shape[0], pp = freqs.shape[1], mm = x.shape[0]
    out_arr = np.empty((kk, mm), dtype=np.complex128)
    cdef double complex[:, ::1] out = out_arr
    cdef Py_ssize_t k, m, p
    cdef double ph
    cdef double complex acc
    with nogil:
        for k in range(kk):
            for m in range(mm):
                acc = 0
                for p in range(pp):
                    ph = freqs[k, p] * x[m]
                    acc = acc + coeffs[k, p] * (cos(ph) + 1j * sin(ph))
                out[k, m] = acc
    return out_arr


def ma_eval(object x_in, object freqs_in, object coeffs_in, object w_in,
            object mu_in, object eps_in, object gamma_in, object v_in,
            object sigma_in, bint want_grad=True):
    """Surrogate values and position gradient at x; see reference.ma_eval."""
    cdef double[::1] x = np.ascontiguousarray(x_in, dtype=np.float64)
    cdef double[:, ::1] freqs = np.ascontiguousarray(freqs_in, dtype=np.float64)
    cdef double complex[:, ::1] coeffs = np.ascontiguousarray(coeffs_in, dtype=np.complex128)
    cdef double complex[:, ::1] w = np.ascontiguousarray(w_in, dtype=np.complex128)
    cdef double[::1] mu = np.ascontiguousarray(mu_in, dtype=np.float64)
    cdef double complex[::1] eps = np.ascontiguousarray(eps_in, dtype=np.complex128)
    cdef double[::1] gamma = np.ascontiguousarray(gamma_in, dtype=np.float64)
    cdef double complex[::1] v = np.ascontiguousarray(v_in, dtype=np.complex128)
    cdef double[::1] sigma_sq = np.ascontiguousarray(sigma_in, dtype=np.float64)

    cdef Py_ssize_t kk = freqs.shape[0], pp = freqs.shape[1], mm = x.shape[0]
    e_arr = np.empty((kk, mm), dtype=np.complex128)
    cdef double complex[:, ::1] e = e_arr
    if want_grad:
        edot_arr = np.empty((kk, mm), dtype=np.complex128)
    else:
        edot_arr = np.empty((0, 0), dtype=np.complex128)
    cdef double complex[:, ::1] edot = edot_arr
    gains_arr = np.empty((kk, kk + 1), dtype=np.complex128)
    cdef double complex[:, ::1] gains = gains_arr
    psi_arr = np.empty(kk, dtype=np.float64)
    t_arr = np.empty(kk, dtype=np.float64)
    cdef double[::1] psi = psi_arr
    cdef double[::1] t = t_arr
    if want_grad:
        grad_arr = np.zeros(mm, dtype=np.float64)
        grad_t_arr = np.zeros((kk, mm), dtype=np.float64)
    else:
        grad_arr = np.zeros(0, dtype=np.float64)
        grad_t_arr = np.zeros((0, 0), dtype=np.float64)
    cdef double[::1] grad = grad_arr
    cdef double[:, ::1] grad_t = grad_t_arr

    cdef Py_ssize_t k, m, p, i
    cdef double ph, p_quad, acc
    cdef double complex z, cph, csum, dsum, q, qc

    with nogil:
        for k in range(kk):
            for m in range(mm):
                csum = 0
                dsum = 0
                for p in range(pp):
                    ph = freqs[k, p] * x[m]
                    cph = cos(ph) + 1j * sin(ph)
                    z = coeffs[k, p] * cph
                    csum = csum + z
                    if want_grad:
                        dsum = dsum + (1j * freqs[k, p]) * z
                e[k, m] = csum
                if want_grad:
                    edot[k, m] = dsum

        for k in range(kk):
            for i in range(kk + 1):
                csum = 0
                for m in range(mm):
                    csum = csum + e[k, m] * w[m, i]
                gains[k, i] = csum

        for k in range(kk):
            p_quad = 0
            for i in range(kk):
                p_quad = p_quad + _abs2(gains[k, i])
            psi[k] = log(1.0 + mu[k]) / LN2 + (
                -mu[k]
                + 2.0 * sqrt(1.0 + mu[k]) * _re_conj_mul(eps[k], gains[k, k])
                - _abs2(eps[k]) * (p_quad + sigma_sq[k])
            ) / LN2
            t[k] = log(1.0 + gamma[k]) / LN2 + (
                -gamma[k]
                + 2.0 * sqrt(1.0 + gamma[k]) * _re_conj_mul(v[k], gains[k, kk])
                - _abs2(v[k]) * (p_quad + _abs2(gains[k, kk]) + sigma_sq[k])
            ) / LN2

        if want_grad:
            for m in range(mm):
                acc = 0
                for k in range(kk):
                    q = 0
                    for i in range(kk):
                        z = gains[k, i]
                        q = q + w[m, i] * (z.real - 1j * z.imag)
                    acc = acc + sqrt(1.0 + mu[k]) * _re_conj_mul(
                        eps[k], edot[k, m] * w[m, k])
                    acc = acc - _abs2(eps[k]) * (edot[k, m] * q).real
                    z = gains[k, kk]
                    qc = q + w[m, kk] * (z.real - 1j * z.imag)
                    grad_t[k, m] = 2.0 / LN2 * (
                        sqrt(1.0 + gamma[k]) * _re_conj_mul(
                            v[k], edot[k, m] * w[m, kk])
                        - _abs2(v[k]) * (edot[k, m] * qc).real)
                grad[m] = 2.0 * acc / LN2

    if want_grad:
        return psi_arr, t_arr, grad_arr, grad_t_arr
    return psi_arr, t_arr, None, None
