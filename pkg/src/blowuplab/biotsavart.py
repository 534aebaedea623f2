"""Brute-force Biot-Savart quadrature for axisymmetric swirl-free vorticity.

u(x) = (1/4 pi) int omega(y) x (x - y) / |x - y|^3 dy with
omega = omega_theta(r, z) e_theta, integrated directly in cylindrical
coordinates (Gauss-Legendre in r and z, trapezoid in the angle). Used as an
independent check of closed-form strain formulas at the origin, so the
vorticity must vanish near the origin.
"""

from __future__ import annotations

import numpy as np
from scipy.special import roots_legendre


def _gauss(a, b, n):
    x, w = roots_legendre(n)
    return 0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * (b - a) * w


def velocity(omega_theta, X, r_max=3.0, z_max=3.0, n_r=160, n_z=320, n_phi=128, chunk=2048):
    """Velocity (N, 3) at Cartesian points X from omega_theta(r, z)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    r, wr = _gauss(0.0, r_max, n_r)
    z, wz = _gauss(-z_max, z_max, n_z)
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    wphi = np.full(n_phi, 2 * np.pi / n_phi)
    Rg, Zg = np.meshgrid(r, z, indexing="ij")
    W2 = np.outer(wr, wz) * Rg  # r dr dz
    om = omega_theta(Rg, Zg)
    keep = np.abs(om) > 0
    Rk, Zk, Wk, Ok = Rg[keep], Zg[keep], W2[keep], om[keep]
    out = np.zeros((X.shape[0], 3))
    c, s = np.cos(phi), np.sin(phi)
    for start in range(0, Rk.size, chunk):
        rr, zz, ww, oo = (v[start : start + chunk, None] for v in (Rk, Zk, Wk, Ok))
        Y = np.stack([rr * c, rr * s, np.broadcast_to(zz, rr.shape * np.array([1, n_phi]))], -1)
        Om = np.stack([-oo * s, oo * c, np.zeros_like(rr * c)], -1)
        wt = ww * wphi[None, :]
        for k, x in enumerate(X):
            D = x - Y
            d3 = np.sum(D * D, -1) ** 1.5
            out[k] += np.einsum("ab,abi->i", wt / d3, np.cross(Om, D))
    return out / (4 * np.pi)


def axis_strain(omega_theta, h=1e-3, **quad) -> float:
    """u_r^r at the origin as the central difference (u_x(h,0,0) - u_x(-h,0,0)) / 2h."""
    U = velocity(omega_theta, np.array([[h, 0, 0], [-h, 0, 0]]), **quad)
    return float((U[0, 0] - U[1, 0]) / (2 * h))


def axial_strain(omega_theta, h=1e-3, **quad) -> float:
    """u_z^z at the origin as (u_z(0,0,h) - u_z(0,0,-h)) / 2h."""
    U = velocity(omega_theta, np.array([[0, 0, h], [0, 0, -h]]), **quad)
    return float((U[0, 2] - U[1, 2]) / (2 * h))
