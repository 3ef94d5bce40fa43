# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; see ``_kernels_py`` for the reference semantics."""

import numpy as np
from libc.math cimport pow, floor, fabs


cdef inline double _pw(double x, double e) noexcept nogil:
    # small integer exponents (n = 3 gives 5 and 6) by repeated squaring
    cdef double r = 1.0, b = x
    cdef int k
    if e == floor(e) and fabs(e) <= 16.0:
        k = <int>fabs(e)
        while k:
            if k & 1:
                r *= b
            b *= b
            k >>= 1
        return r if e >= 0 else 1.0 / r
    return pow(x, e)


cdef void _laplacian(const long long[::1] indptr, const long long[::1] indices,
                     const double[::1] w, const double[::1] vol,
                     const double[::1] f, double[::1] out) noexcept nogil:
    cdef Py_ssize_t i, k, n = vol.shape[0]
    cdef double acc, fi
    for i in range(n):
        acc = 0.0
        fi = f[i]
        for k in range(indptr[i], indptr[i + 1]):
            acc += w[k] * (f[indices[k]] - fi)
        out[i] = acc / vol[i]


cdef double _rhs(const long long[::1] indptr, const long long[::1] indices,
                 const double[::1] w, const double[::1] vol, const double[::1] r0,
                 const double[::1] u, double p, double c, double kappa, double m,
                 bint normalized, double[::1] lap, double[::1] out) noexcept nogil:
    # returns Rbar (0 in unnormalized mode); out <- du/dt
    cdef Py_ssize_t i, n = vol.shape[0]
    cdef double num = 0.0, den = 0.0, dv, rbar = 0.0
    _laplacian(indptr, indices, w, vol, u, lap)
    for i in range(n):
        out[i] = _pw(u[i], -p) * (-c * lap[i] + r0[i] * u[i])
    if normalized:
        for i in range(n):
            dv = _pw(u[i], m) * vol[i]
            num += out[i] * dv
            den += dv
        rbar = num / den
    for i in range(n):
        out[i] = -kappa * (out[i] - rbar) * u[i]
    return rbar


def laplacian_apply(indptr, indices, weights, vol, f):
    out = np.empty(len(vol))
    _laplacian(indptr, indices, weights, vol, np.ascontiguousarray(f, dtype=float), out)
    return out


def curvature(indptr, indices, weights, vol, r0, u, double p, double c):
    cdef Py_ssize_t i, n = len(vol)
    cdef const double[::1] uu = np.ascontiguousarray(u, dtype=float)
    cdef const double[::1] rr = r0
    lap_arr = np.empty(n)
    cdef double[::1] lap = lap_arr
    _laplacian(indptr, indices, weights, vol, uu, lap)
    for i in range(n):
        lap[i] = _pw(uu[i], -p) * (-c * lap[i] + rr[i] * uu[i])
    return lap_arr


cdef int _rk4(const long long[::1] ip, const long long[::1] ix, const double[::1] ww,
              const double[::1] vv, const double[::1] rr, const double[::1] u0,
              double dt, double p, double c, double kappa, double m, bint normalized,
              double[:, ::1] k, double[::1] lap, double[::1] stage,
              double[::1] out) noexcept nogil:
    cdef Py_ssize_t i, n = vv.shape[0]
    cdef int s
    cdef double frac
    _rhs(ip, ix, ww, vv, rr, u0, p, c, kappa, m, normalized, lap, k[0])
    for s in range(3):
        frac = 1.0 if s == 2 else 0.5
        for i in range(n):
            stage[i] = u0[i] + frac * dt * k[s, i]
            if not stage[i] > 0.0:
                return 1
        _rhs(ip, ix, ww, vv, rr, stage, p, c, kappa, m, normalized, lap, k[s + 1])
    for i in range(n):
        out[i] = u0[i] + (dt / 6.0) * (k[0, i] + 2.0 * k[1, i] + 2.0 * k[2, i] + k[3, i])
        if not out[i] > 0.0:
            return 1
    return 0


def rk4_step(indptr, indices, weights, vol, r0, u, double dt, double p, double c,
             double kappa, double m, bint normalized):
    cdef Py_ssize_t n = len(vol)
    u_arr = np.ascontiguousarray(u, dtype=float)
    out_arr = np.empty(n)
    cdef int status
    status = _rk4(indptr, indices, weights, vol, r0, u_arr, dt, p, c, kappa, m,
                  normalized, np.empty((4, n)), np.empty(n), np.empty(n), out_arr)
    if status:
        return u_arr.copy(), 1
    return out_arr, 0
