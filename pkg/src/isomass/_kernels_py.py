"""Pure numpy implementation of the quadrature grid kernels.

Mirrors ``_kernels.pyx`` operation for operation; used when the compiled
extension is unavailable or ``ISOMASS_BACKEND=python`` is set.
"""

from __future__ import annotations

import math

import numpy as np


def _pow4m1(t):
    # (1 + t)**4 - 1 without cancellation for t >= -1/2
    u = (1.0 + t) * (1.0 + t)
    return np.where(t < -0.5, u * u - 1.0, t * (4.0 + t * (6.0 + t * (4.0 + t))))


def _pow6m1(t):
    u = (1.0 + t) * (1.0 + t)
    return np.where(t < -0.5, u * u * u - 1.0,
                    t * (6.0 + t * (15.0 + t * (20.0 + t * (15.0 + t * (6.0 + t))))))


def _sqrt1pm1(x):
    return x / (np.sqrt(1.0 + x) + 1.0)


def _deviation(code, p, x, y, z):
    r2 = x * x + y * y + z * z
    if code == 0:
        zero = np.zeros_like(r2)
        return zero, zero, zero
    if code == 1:
        k = _pow4m1(p[0] / (2.0 * np.sqrt(r2)))
        return k, k, k
    w = np.exp(-0.5 * p[1 if code == 2 else 3] * np.log1p(r2))
    if code == 2:
        k = p[0] * w
        return k, k, k
    return p[0] * w, p[1] * w, p[2] * w


def _density_excess(code, p, x, y, z):
    if code == 0:
        return np.zeros_like(x)
    if code == 1:
        return _pow6m1(p[0] / (2.0 * np.sqrt(x * x + y * y + z * z)))
    k1, k2, k3 = _deviation(code, p, x, y, z)
    if code == 2:
        return _sqrt1pm1(k1 * (3.0 + k1 * (3.0 + k1)))
    return _sqrt1pm1(k1 + k2 + k3 + k1 * k2 + k1 * k3 + k2 * k3 + k1 * k2 * k3)


def _phi_table(nphi):
    phi = 2.0 * math.pi * np.arange(nphi) / nphi
    return np.cos(phi), np.sin(phi)


def ball_grid(code, params, center, frame, rho, mu, nphi):
    """Integrate ``sqrt(det g) - 1`` over phi on a (rho, mu) node grid.

    Returns ``(fine, coarse)`` arrays of shape (len(rho), len(mu)); ``fine``
    uses all ``nphi`` trapezoid points, ``coarse`` every other one.
    """
    p = np.asarray(params, dtype=float)
    c = np.asarray(center, dtype=float)
    e = np.asarray(frame, dtype=float)
    rho = np.asarray(rho, dtype=float)
    mu = np.asarray(mu, dtype=float)
    cph, sph = _phi_table(nphi)
    s = np.sqrt(1.0 - mu * mu)
    # unit direction n[j, l, :]
    n = (s[:, None, None] * cph[None, :, None] * e[0]
         + s[:, None, None] * sph[None, :, None] * e[1]
         + mu[:, None, None] * e[2])
    x = c + rho[:, None, None, None] * n[None]
    f = _density_excess(code, p, x[..., 0], x[..., 1], x[..., 2])
    w = 2.0 * math.pi / nphi
    fine = f.sum(axis=2) * w
    coarse = f[:, :, ::2].sum(axis=2) * (2.0 * w)
    return fine, coarse


def sphere_grid(code, params, center, frame, radius, mu, nphi, general):
    """Integrate the area-element excess over phi at each mu node.

    The flat area element in (mu, phi) is ``radius**2``; the integrand is
    ``sqrt(det h) / radius**2 - 1`` with ``h`` the induced metric.
    ``general`` selects the induced-metric path; otherwise the conformal
    shortcut ``g_11 - 1`` is used.
    """
    p = np.asarray(params, dtype=float)
    c = np.asarray(center, dtype=float)
    e = np.asarray(frame, dtype=float)
    mu = np.asarray(mu, dtype=float)[:, None]
    cph, sph = _phi_table(nphi)
    cph = cph[None, :]
    sph = sph[None, :]
    s = np.sqrt(1.0 - mu * mu)
    nx = s * cph * e[0, 0] + s * sph * e[1, 0] + mu * e[2, 0]
    ny = s * cph * e[0, 1] + s * sph * e[1, 1] + mu * e[2, 1]
    nz = s * cph * e[0, 2] + s * sph * e[1, 2] + mu * e[2, 2]
    x = c[0] + radius * nx
    y = c[1] + radius * ny
    z = c[2] + radius * nz
    k1, k2, k3 = _deviation(code, p, x, y, z)
    if general:
        # a = s * d n / d mu, b = (1/s) * d n / d phi; both unit, orthogonal
        ax = -mu * (cph * e[0, 0] + sph * e[1, 0]) + s * e[2, 0]
        ay = -mu * (cph * e[0, 1] + sph * e[1, 1]) + s * e[2, 1]
        az = -mu * (cph * e[0, 2] + sph * e[1, 2]) + s * e[2, 2]
        bx = -sph * e[0, 0] + cph * e[1, 0]
        by = -sph * e[0, 1] + cph * e[1, 1]
        bz = -sph * e[0, 2] + cph * e[1, 2]
        pa = k1 * ax * ax + k2 * ay * ay + k3 * az * az
        qb = k1 * bx * bx + k2 * by * by + k3 * bz * bz
        cr = k1 * ax * bx + k2 * ay * by + k3 * az * bz
        X = pa + qb + pa * qb - cr * cr
        f = _sqrt1pm1(X)
    else:
        f = k1
    w = 2.0 * math.pi / nphi
    fine = f.sum(axis=1) * w
    coarse = f[:, ::2].sum(axis=1) * (2.0 * w)
    return fine, coarse
