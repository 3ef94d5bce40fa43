"""CR analogue on a discretized Heisenberg nilmanifold.

The nilmanifold is the quotient of the Heisenberg group with the polarized law
``(a, b, c) . (x, y, t) = (a + x, b + y, c + t + a y)`` by the integer lattice.
Horizontal fields are ``X = d/dx`` and ``Y = d/dy + x d/dt``. The grid has
``N`` points per axis with spacing ``h = 1/N``.

An X step stays on the grid (the x-wrap maps ``(1, y, t)`` to ``(0, y, t - y)``,
a whole number of cells). A Y step from column ``i`` lands ``i/N`` of a cell up
in t, so each Y edge is split between the two nearest t-levels with linear
interpolation weights. The resulting Dirichlet form is symmetric, positive
semidefinite and annihilates constants.
"""

from __future__ import annotations

import numpy as np

from .errors import ConstructionError
from .flow import FlowConfig, flow_step, run_flow
from .geometry import (
    BackgroundGeometry,
    BackgroundSpec,
    ConformalLaw,
    ConformalState,
    _check_connected,
    _curvature_field,
    _readonly,
    scalar_curvature,
)

CRBackground = BackgroundGeometry
CRConformalState = ConformalState


def heisenberg_edges(N: int):
    """Edges, weights and lengths of the horizontal stencil on an N^3 grid."""
    h = 1.0 / N
    idx = np.arange(N**3).reshape(N, N, N)
    i, j, k = np.meshgrid(np.arange(N), np.arange(N), np.arange(N), indexing="ij")

    # X edges; the x-wrap shifts t by -y
    ip = (i + 1) % N
    kp = np.where(i == N - 1, (k - j) % N, k)
    ex = np.stack([idx.ravel(), idx[ip, j, kp].ravel()], axis=1)
    wx = np.full(len(ex), h)

    # Y edges split between t-levels k and k+1
    theta = (i / N).ravel()
    jp = (j + 1) % N
    lo = np.stack([idx.ravel(), idx[i, jp, k].ravel()], axis=1)
    hi = np.stack([idx.ravel(), idx[i, jp, (k + 1) % N].ravel()], axis=1)
    wlo = h * (1.0 - theta)
    whi = h * theta
    keep = whi > 0
    edges = np.concatenate([ex, lo, hi[keep]])
    weights = np.concatenate([wx, wlo, whi[keep]])
    return edges, weights, np.full(len(edges), h)


def nil_bump(coords, center=None, width=0.2):
    """Gaussian bump periodized over the lattice, scaled to 1 at ``center``.

    Summing ``exp(-|g p - c|^2 / (2 w^2))`` over lattice elements ``g`` gives a
    function that is well defined on the quotient, so it is smooth across the
    twisted x-wrap (a plain periodic bump is not).
    """
    coords = np.atleast_2d(np.asarray(coords, dtype=float))
    c = np.full(3, 0.5) if center is None else np.asarray(center, dtype=float)
    K = int(np.ceil(6.0 * width)) + 1

    def raw(p):
        x, y, t = p[:, 0], p[:, 1], p[:, 2]
        out = np.zeros(len(p))
        for a in range(-K, K + 1):
            for b in range(-K, K + 1):
                for cc in range(-2 * K - 1, 2 * K + 2):
                    r2 = (a + x - c[0]) ** 2 + (b + y - c[1]) ** 2 + (cc + t + a * y - c[2]) ** 2
                    out += np.exp(-r2 / (2.0 * width**2))
        return out

    return raw(coords) / raw(c[None, :])[0]


def _merge_edges(edges, weights, lengths):
    edges = np.sort(edges, axis=1)
    key, inv = np.unique(edges, axis=0, return_inverse=True)
    inv = inv.ravel()
    w = np.bincount(inv, weights=weights, minlength=len(key))
    ln = np.bincount(inv, weights=lengths, minlength=len(key)) / np.bincount(inv, minlength=len(key))
    return key, w, ln


def build_heisenberg(spec=None, *, N: int | None = None, r0=None) -> CRBackground:
    """Build the nilmanifold background with CR dimension 1.

    Either pass a :class:`BackgroundSpec` (``kind="heisenberg"``) or the grid
    size ``N`` and a curvature constant or field ``r0``.
    """
    if spec is None:
        spec = BackgroundSpec(kind="heisenberg", N=8 if N is None else N)
    elif not isinstance(spec, BackgroundSpec):
        spec = BackgroundSpec(**{"kind": "heisenberg", **dict(spec)})
    cr_n = 1 if spec.n is None else int(spec.n)
    if cr_n != 1:
        raise ConstructionError(f"n: only CR dimension 1 grids are supported, got {cr_n}")
    Ns = np.atleast_1d(spec.N)
    if len(set(int(x) for x in Ns)) != 1:
        raise ConstructionError("N: heisenberg grids use the same size on every axis")
    N = int(Ns[0])
    if N < 3:
        raise ConstructionError(f"N: grid size must be >= 3, got {N}")
    h = 1.0 / N
    edges, weights, lengths = _merge_edges(*heisenberg_edges(N))
    V = N**3
    grid = np.stack(np.meshgrid(*[np.arange(N)] * 3, indexing="ij"), axis=-1).reshape(-1, 3)
    coords = grid * h
    vol = np.full(V, h**3)
    if r0 is not None:
        field = np.broadcast_to(np.asarray(r0, dtype=float), (V,)).copy()
        if not np.all(np.isfinite(field)):
            raise ConstructionError("r0: background curvature must be finite")
    else:
        field = _curvature_field(spec, coords, (1.0, 1.0, 1.0), True, V,
                                 bump=lambda p, _ext, c, w: nil_bump(p, c, w))
    bmask = np.zeros(V, dtype=bool)
    _check_connected(V, edges)
    _readonly(edges, weights, lengths, vol, field, bmask, coords)
    return BackgroundGeometry(
        dimension_n=cr_n, kind="heisenberg", edges=edges, edge_weights=weights,
        edge_lengths=lengths, vertex_volumes=vol, background_curvature=field,
        boundary=bmask, law=ConformalLaw.cr(cr_n), coordinates=coords,
        shape=(N, N, N), extent=(1.0, 1.0, 1.0), periodic=True,
        meta={"spacing": (h, h, h)},
    )


def _require_cr(crbg):
    if crbg.law.geometry != "cr":
        raise ConstructionError("expected a CR background (kind=heisenberg)")


def webster_curvature(crbg: CRBackground, u) -> np.ndarray:
    """Webster curvature of the contact form ``u^(2/n) theta0``."""
    _require_cr(crbg)
    return scalar_curvature(crbg, u)


def cr_flow_step(crbg: CRBackground, state: CRConformalState, dt: float, mode: str = "normalized"):
    """One RK4 step of the CR Yamabe flow."""
    _require_cr(crbg)
    return flow_step(crbg, state, dt, mode)


def run_cr_flow(crbg: CRBackground, u0, cfg: FlowConfig):
    """Run the CR Yamabe flow; same contract and trace as :func:`run_flow`."""
    _require_cr(crbg)
    return run_flow(crbg, u0, cfg)
