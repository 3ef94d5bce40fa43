"""Pure numpy implementation of the hot kernels.

Every function mirrors the signature of the compiled module ``_ckernels`` so
the two are interchangeable. Graph arrays are the CSR triple of the symmetric
Dirichlet weight matrix (no diagonal).
"""

import numpy as np
import scipy.sparse as sp


def _weight_matrix(indptr, indices, weights):
    n = len(indptr) - 1
    return sp.csr_matrix((weights, indices, indptr), shape=(n, n))


def laplacian_apply(indptr, indices, weights, vol, f):
    """Background Laplacian ``(1/v_i) sum_j w_ij (f_j - f_i)``."""
    W = _weight_matrix(indptr, indices, weights)
    return (W @ f - (W @ np.ones_like(f)) * f) / vol


def curvature(indptr, indices, weights, vol, r0, u, p, c):
    """Conformal curvature ``u^-p (-c L0 u + r0 u)``."""
    lap = laplacian_apply(indptr, indices, weights, vol, u)
    return u ** (-p) * (-c * lap + r0 * u)


def _rhs(indptr, indices, weights, vol, r0, u, p, c, kappa, m, normalized):
    R = curvature(indptr, indices, weights, vol, r0, u, p, c)
    if normalized:
        dv = u**m * vol
        rbar = np.dot(R, dv) / dv.sum()
        return -kappa * (R - rbar) * u
    return -kappa * R * u


def rk4_step(indptr, indices, weights, vol, r0, u, dt, p, c, kappa, m, normalized):
    """One classical RK4 step of ``du/dt = -kappa (R - [Rbar]) u``.

    Returns ``(u_new, status)``; status 1 flags a nonpositive stage value, in
    which case ``u_new`` is an unchanged copy of ``u``.
    """
    args = (indptr, indices, weights, vol, r0)
    k1 = _rhs(*args, u, p, c, kappa, m, normalized)
    u2 = u + 0.5 * dt * k1
    if not np.all(u2 > 0):
        return u.copy(), 1
    k2 = _rhs(*args, u2, p, c, kappa, m, normalized)
    u3 = u + 0.5 * dt * k2
    if not np.all(u3 > 0):
        return u.copy(), 1
    k3 = _rhs(*args, u3, p, c, kappa, m, normalized)
    u4 = u + dt * k3
    if not np.all(u4 > 0):
        return u.copy(), 1
    k4 = _rhs(*args, u4, p, c, kappa, m, normalized)
    out = u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(out > 0):
        return u.copy(), 1
    return out, 0
