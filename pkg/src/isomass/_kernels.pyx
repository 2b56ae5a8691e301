# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled quadrature grid kernels; same contract as ``_kernels_py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, exp, log1p, M_PI

cnp.import_array()


cdef inline double _pow4m1(double t) noexcept nogil:
    # (1 + t)**4 - 1 without cancellation for t >= -1/2
    cdef double u
    if t < -0.5:
        u = (1.0 + t) * (1.0 + t)
        return u * u - 1.0
    return t * (4.0 + t * (6.0 + t * (4.0 + t)))


cdef inline double _pow6m1(double t) noexcept nogil:
    cdef double u
    if t < -0.5:
        u = (1.0 + t) * (1.0 + t)
        return u * u * u - 1.0
    return t * (6.0 + t * (15.0 + t * (20.0 + t * (15.0 + t * (6.0 + t)))))


cdef inline double _sqrt1pm1(double x) noexcept nogil:
    return x / (sqrt(1.0 + x) + 1.0)


cdef inline void _deviation(int code, const double* p, double x, double y,
                            double z, double* k) noexcept nogil:
    cdef double r2 = x * x + y * y + z * z
    cdef double w
    if code == 0:
        k[0] = 0.0; k[1] = 0.0; k[2] = 0.0
    elif code == 1:
        w = _pow4m1(p[0] / (2.0 * sqrt(r2)))
        k[0] = w; k[1] = w; k[2] = w
    elif code == 2:
        w = p[0] * exp(-0.5 * p[1] * log1p(r2))
        k[0] = w; k[1] = w; k[2] = w
    else:
        w = exp(-0.5 * p[3] * log1p(r2))
        k[0] = p[0] * w; k[1] = p[1] * w; k[2] = p[2] * w


cdef inline double _density_excess(int code, const double* p, double x,
                                   double y, double z) noexcept nogil:
    cdef double k[3]
    cdef double w
    if code == 0:
        return 0.0
    if code == 1:
        return _pow6m1(p[0] / (2.0 * sqrt(x * x + y * y + z * z)))
    _deviation(code, p, x, y, z, k)
    if code == 2:
        w = k[0]
        return _sqrt1pm1(w * (3.0 + w * (3.0 + w)))
    return _sqrt1pm1(k[0] + k[1] + k[2] + k[0] * k[1] + k[0] * k[2]
                     + k[1] * k[2] + k[0] * k[1] * k[2])


def ball_grid(int code, params, center, frame, rho, mu, int nphi):
    cdef double[::1] p = np.ascontiguousarray(params, dtype=np.float64)
    cdef double[::1] c = np.ascontiguousarray(center, dtype=np.float64)
    cdef double[:, ::1] e = np.ascontiguousarray(frame, dtype=np.float64)
    cdef double[::1] r = np.ascontiguousarray(rho, dtype=np.float64)
    cdef double[::1] m = np.ascontiguousarray(mu, dtype=np.float64)
    cdef Py_ssize_t nr = r.shape[0], nm = m.shape[0]
    fine_arr = np.zeros((nr, nm))
    coarse_arr = np.zeros((nr, nm))
    cdef double[:, ::1] fine = fine_arr
    cdef double[:, ::1] coarse = coarse_arr
    cdef double[::1] cph = np.cos(2.0 * M_PI * np.arange(nphi) / nphi)
    cdef double[::1] sph = np.sin(2.0 * M_PI * np.arange(nphi) / nphi)
    cdef double w = 2.0 * M_PI / nphi
    cdef Py_ssize_t i, j, l
    cdef double s, nx, ny, nz, f, acc_f, acc_c
    with nogil:
        for i in range(nr):
            for j in range(nm):
                s = sqrt(1.0 - m[j] * m[j])
                acc_f = 0.0
                acc_c = 0.0
                for l in range(nphi):
                    nx = s * cph[l] * e[0, 0] + s * sph[l] * e[1, 0] + m[j] * e[2, 0]
                    ny = s * cph[l] * e[0, 1] + s * sph[l] * e[1, 1] + m[j] * e[2, 1]
                    nz = s * cph[l] * e[0, 2] + s * sph[l] * e[1, 2] + m[j] * e[2, 2]
                    f = _density_excess(code, &p[0], c[0] + r[i] * nx,
                                        c[1] + r[i] * ny, c[2] + r[i] * nz)
                    acc_f += f
                    if l % 2 == 0:
                        acc_c += f
                fine[i, j] = acc_f * w
                coarse[i, j] = acc_c * (2.0 * w)
    return fine_arr, coarse_arr


def sphere_grid(int code, params, center, frame, double radius, mu, int nphi,
                bint general):
    cdef double[::1] p = np.ascontiguousarray(params, dtype=np.float64)
    cdef double[::1] c = np.ascontiguousarray(center, dtype=np.float64)
    cdef double[:, ::1] e = np.ascontiguousarray(frame, dtype=np.float64)
    cdef double[::1] m = np.ascontiguousarray(mu, dtype=np.float64)
    cdef Py_ssize_t nm = m.shape[0]
    fine_arr = np.zeros(nm)
    coarse_arr = np.zeros(nm)
    cdef double[::1] fine = fine_arr
    cdef double[::1] coarse = coarse_arr
    cdef double[::1] cph = np.cos(2.0 * M_PI * np.arange(nphi) / nphi)
    cdef double[::1] sph = np.sin(2.0 * M_PI * np.arange(nphi) / nphi)
    cdef double w = 2.0 * M_PI / nphi
    cdef Py_ssize_t j, l, q
    cdef double s, mj, n[3], a[3], b[3], k[3]
    cdef double pa, qb, cr, X, f, acc_f, acc_c
    with nogil:
        for j in range(nm):
            mj = m[j]
            s = sqrt(1.0 - mj * mj)
            acc_f = 0.0
            acc_c = 0.0
            for l in range(nphi):
                for q in range(3):
                    n[q] = s * cph[l] * e[0, q] + s * sph[l] * e[1, q] + mj * e[2, q]
                _deviation(code, &p[0], c[0] + radius * n[0],
                           c[1] + radius * n[1], c[2] + radius * n[2], k)
                if general:
                    pa = 0.0
                    qb = 0.0
                    cr = 0.0
                    for q in range(3):
                        a[q] = -mj * (cph[l] * e[0, q] + sph[l] * e[1, q]) + s * e[2, q]
                        b[q] = -sph[l] * e[0, q] + cph[l] * e[1, q]
                        pa = pa + k[q] * a[q] * a[q]
                        qb = qb + k[q] * b[q] * b[q]
                        cr = cr + k[q] * a[q] * b[q]
                    X = pa + qb + pa * qb - cr * cr
                    f = _sqrt1pm1(X)
                else:
                    f = k[0]
                acc_f += f
                if l % 2 == 0:
                    acc_c += f
            fine[j] = acc_f * w
            coarse[j] = acc_c * (2.0 * w)
    return fine_arr, coarse_arr
