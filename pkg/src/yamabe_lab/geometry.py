"""Discrete backgrounds and the conformal-geometry kernel.

A background is a connected weighted graph carrying a Dirichlet form
``sum_edges w_ij (f_i - f_j)^2``, vertex volumes ``v_i``, edge lengths and a
background curvature field. Conformal quantities for a positive factor ``u``
follow the transformation law

    R = u^{-p} (-c * L0 u + R0 u),       L0 f(i) = -(1/v_i) sum_j w_ij (f_i - f_j)

with exponents collected in :class:`ConformalLaw`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

from . import kernels
from .errors import ConstructionError, DomainError

KINDS = ("flat-torus", "box-with-boundary", "synthetic", "heisenberg")


@dataclass(frozen=True)
class ConformalLaw:
    """Exponents of a conformal transformation law.

    Riemannian (``g = u^{4/(n-2)} g0``) and CR (``theta = u^{2/n} theta0``)
    geometries differ only in these numbers, so every flow, spectral and
    verification routine is written once against this object.
    """

    geometry: str
    n: int
    curvature_exponent: float  # p in R = u^-p(...)
    coupling: float  # c multiplying the Laplacian of u
    volume_exponent: float  # dV = u^m dV0
    flow_rate: float  # du/dt = -rate (R - Rbar) u
    diffusion: float  # dR/dt = diffusion * Lap R + ...
    length_exponent: float  # lengths scale like u^ell

    @classmethod
    def riemannian(cls, n: int) -> "ConformalLaw":
        return cls(
            geometry="riemannian",
            n=n,
            curvature_exponent=(n + 2) / (n - 2),
            coupling=4.0 * (n - 1) / (n - 2),
            volume_exponent=2.0 * n / (n - 2),
            flow_rate=(n - 2) / 4.0,
            diffusion=float(n - 1),
            length_exponent=2.0 / (n - 2),
        )

    @classmethod
    def cr(cls, n: int) -> "ConformalLaw":
        return cls(
            geometry="cr",
            n=n,
            curvature_exponent=1.0 + 2.0 / n,
            coupling=2.0 + 2.0 / n,
            volume_exponent=(2.0 * n + 2.0) / n,
            flow_rate=n / 2.0,
            diffusion=float(n + 1),
            length_exponent=1.0 / n,
        )

    @property
    def curvature_scaling(self) -> float:
        """Exponent e with R(k u) = k^e R(u)."""
        return 1.0 - self.curvature_exponent

    @property
    def energy_coefficient(self) -> float:
        """Coefficient of (R - Rbar)|grad f|^2 in the energy derivative."""
        return 2.0 * self.flow_rate

    @property
    def mass_coefficient(self) -> float:
        """Coefficient of (R - Rbar) f^2 in the mass derivative."""
        return self.volume_exponent * self.flow_rate

    @property
    def sandwich_coefficient(self) -> float:
        """c = coefficient * (min R0 / max R0 - 1)."""
        return 2.0 * (self.energy_coefficient + self.mass_coefficient)

    @property
    def critical_a(self) -> float:
        """Potential strength separating the two monotonicity regimes."""
        return self.flow_rate / self.diffusion

    @property
    def pinching_ratio(self) -> float:
        """Regime-(i) requirement min R >= ratio * max R."""
        return 2.0 / self.volume_exponent


@dataclass(frozen=True)
class BackgroundSpec:
    """Descriptor accepted by :func:`build_background`.

    ``N`` and ``L`` may be scalars or per-axis sequences. The curvature field
    is ``r0 + r0_bump_amplitude * bump + r0_noise * uniform(-1, 1)`` unless
    ``r0_field`` is given; flat tori force it to zero.
    """

    kind: str = "flat-torus"
    n: int | None = None  # 3 for Riemannian kinds, 1 for heisenberg
    d: int = 3
    N: int | Sequence[int] = 8
    L: float | Sequence[float] = 2.0 * math.pi
    r0: float = 0.0
    r0_bump_amplitude: float = 0.0
    r0_bump_width: float = 1.0
    r0_bump_center: Sequence[float] | None = None
    r0_noise: float = 0.0
    r0_field: Sequence[float] | None = None
    seed: int = 0


@dataclass(frozen=True, eq=False)
class BackgroundGeometry:
    """Weighted-graph discretization of a compact background."""

    dimension_n: int
    kind: str
    edges: np.ndarray  # (E, 2) int, i < j
    edge_weights: np.ndarray
    edge_lengths: np.ndarray
    vertex_volumes: np.ndarray
    background_curvature: np.ndarray
    boundary: np.ndarray  # bool mask
    law: ConformalLaw
    coordinates: np.ndarray | None = None  # (V, d) physical positions
    shape: tuple = ()
    extent: tuple = ()
    periodic: bool = True
    meta: dict = field(default_factory=dict)

    @property
    def num_vertices(self) -> int:
        return len(self.vertex_volumes)

    @property
    def has_boundary(self) -> bool:
        return bool(self.boundary.any())

    @cached_property
    def interior(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary)

    @cached_property
    def kernel_arrays(self):
        """CSR arrays of the symmetric weight matrix, in kernel dtypes."""
        W = self.weight_matrix
        return (
            W.indptr.astype(np.int64),
            W.indices.astype(np.int64),
            np.ascontiguousarray(W.data, dtype=float),
            np.ascontiguousarray(self.vertex_volumes, dtype=float),
            np.ascontiguousarray(self.background_curvature, dtype=float),
        )

    @cached_property
    def weight_matrix(self) -> sp.csr_matrix:
        V = self.num_vertices
        i, j = self.edges[:, 0], self.edges[:, 1]
        W = sp.coo_matrix(
            (np.concatenate([self.edge_weights, self.edge_weights]),
             (np.concatenate([i, j]), np.concatenate([j, i]))),
            shape=(V, V),
        ).tocsr()
        W.sum_duplicates()
        W.sort_indices()
        return W

    @cached_property
    def stiffness(self) -> sp.csr_matrix:
        """PSD matrix of the background Dirichlet form."""
        W = self.weight_matrix
        return (sp.diags(np.asarray(W.sum(axis=1)).ravel()) - W).tocsr()

    def laplacian(self, f: np.ndarray) -> np.ndarray:
        """Background Laplacian (negative semidefinite convention)."""
        ip, ix, w, vol, _ = self.kernel_arrays
        return kernels.laplacian_apply(ip, ix, w, vol, np.asarray(f, dtype=float))

    @cached_property
    def laplacian_max_eigenvalue(self) -> float:
        """Power-iteration estimate of the largest eigenvalue of -L0."""
        K = self.stiffness
        vol = self.vertex_volumes
        rng = np.random.default_rng(12345)
        x = rng.standard_normal(self.num_vertices)
        lam = 0.0
        for _ in range(200):
            y = (K @ x) / vol
            lam_new = float(np.dot(x * vol, y) / np.dot(x * vol, x))
            x = y / np.linalg.norm(y)
            if abs(lam_new - lam) <= 1e-6 * abs(lam_new):
                lam = lam_new
                break
            lam = lam_new
        return lam

    def with_curvature(self, r0) -> "BackgroundGeometry":
        """Copy with a different background curvature field."""
        r0 = np.broadcast_to(np.asarray(r0, dtype=float), (self.num_vertices,)).copy()
        if not np.all(np.isfinite(r0)):
            raise ConstructionError("background curvature must be finite")
        r0.setflags(write=False)
        kind = "synthetic" if self.kind == "flat-torus" else self.kind
        return BackgroundGeometry(
            dimension_n=self.dimension_n, kind=kind, edges=self.edges,
            edge_weights=self.edge_weights, edge_lengths=self.edge_lengths,
            vertex_volumes=self.vertex_volumes, background_curvature=r0,
            boundary=self.boundary, law=self.law, coordinates=self.coordinates,
            shape=self.shape, extent=self.extent, periodic=self.periodic,
            meta=dict(self.meta),
        )


def _readonly(*arrays):
    for a in arrays:
        a.setflags(write=False)


def _check_connected(V, edges):
    if V == 0:
        raise ConstructionError("background has no vertices")
    if len(edges) == 0 and V > 1:
        raise ConstructionError("background has no edges")
    G = sp.coo_matrix((np.ones(len(edges)), (edges[:, 0], edges[:, 1])), shape=(V, V))
    ncomp, _ = csgraph.connected_components(G, directed=False)
    if ncomp != 1:
        raise ConstructionError(f"background graph is disconnected ({ncomp} components)")


def from_graph(
    edges,
    weights,
    vertex_volumes,
    *,
    n: int = 3,
    lengths=None,
    curvature=None,
    boundary=None,
    geometry: str = "riemannian",
) -> BackgroundGeometry:
    """Build a ``synthetic`` background from an explicit weighted graph."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    weights = np.asarray(weights, dtype=float).reshape(-1)
    vol = np.asarray(vertex_volumes, dtype=float).reshape(-1)
    V = len(vol)
    if len(weights) != len(edges):
        raise ConstructionError("weights: one weight per edge required")
    if np.any(weights <= 0) or np.any(vol <= 0):
        raise ConstructionError("weights and vertex_volumes must be strictly positive")
    if np.any(edges[:, 0] == edges[:, 1]) or edges.min(initial=0) < 0 or edges.max(initial=0) >= V:
        raise ConstructionError("edges: invalid vertex indices or self-loops")
    lengths = np.ones(len(edges)) if lengths is None else np.asarray(lengths, dtype=float)
    if np.any(lengths <= 0):
        raise ConstructionError("lengths must be strictly positive")
    r0 = np.zeros(V) if curvature is None else np.broadcast_to(
        np.asarray(curvature, dtype=float), (V,)).copy()
    if not np.all(np.isfinite(r0)):
        raise ConstructionError("curvature must be finite")
    bmask = np.zeros(V, dtype=bool)
    if boundary is not None:
        bmask[np.asarray(boundary, dtype=np.int64)] = True
    _check_connected(V, edges)
    law = ConformalLaw.cr(n) if geometry == "cr" else _riemannian_law(n)
    edges = np.sort(edges, axis=1)
    _readonly(edges, weights, lengths, vol, r0, bmask)
    return BackgroundGeometry(
        dimension_n=n, kind="synthetic", edges=edges, edge_weights=weights,
        edge_lengths=lengths, vertex_volumes=vol, background_curvature=r0,
        boundary=bmask, law=law, periodic=False,
    )


def _riemannian_law(n):
    if n < 3:
        raise ConstructionError(f"n: conformal dimension must be >= 3, got {n}")
    return ConformalLaw.riemannian(n)


def _per_axis(value, d, name, cast):
    if np.ndim(value) == 0:
        return (cast(value),) * d
    vals = tuple(cast(v) for v in value)
    if len(vals) != d:
        raise ConstructionError(f"{name}: expected {d} entries, got {len(vals)}")
    return vals


def _lattice_edges(shape, periodic):
    """Axis-aligned nearest-neighbour edges of a lattice, with their axis."""
    idx = np.arange(int(np.prod(shape))).reshape(shape)
    pairs, axes = [], []
    for ax, N in enumerate(shape):
        if periodic:
            a = idx
            b = np.roll(idx, -1, axis=ax)
        else:
            sl_a = [slice(None)] * len(shape)
            sl_b = [slice(None)] * len(shape)
            sl_a[ax] = slice(0, N - 1)
            sl_b[ax] = slice(1, N)
            a, b = idx[tuple(sl_a)], idx[tuple(sl_b)]
        pairs.append(np.stack([a.ravel(), b.ravel()], axis=1))
        axes.append(np.full(a.size, ax))
    return np.concatenate(pairs), np.concatenate(axes)


def periodic_bump(coords, extent, center, width):
    """Smooth periodic bump with value 1 at ``center`` (fractional coordinates).

    Distances use the chord ``(L/pi) sin(pi dx / L)`` so the field is smooth on
    the torus and Gaussian of the given width near the center.
    """
    coords = np.atleast_2d(coords)
    d = coords.shape[1]
    center = np.full(d, 0.5) if center is None else np.asarray(center, dtype=float)
    r2 = np.zeros(len(coords))
    for k in range(d):
        L = extent[k]
        chord = (L / math.pi) * np.sin(math.pi * (coords[:, k] - center[k] * L) / L)
        r2 += chord**2
    return np.exp(-r2 / (2.0 * width**2))


def plain_bump(coords, extent, center, width):
    """Gaussian bump with value 1 at ``center`` (fractional coordinates)."""
    coords = np.atleast_2d(coords)
    d = coords.shape[1]
    center = np.full(d, 0.5) if center is None else np.asarray(center, dtype=float)
    r2 = ((coords - center * np.asarray(extent)) ** 2).sum(axis=1)
    return np.exp(-r2 / (2.0 * width**2))


def bump_field(bg: BackgroundGeometry, center=None, width=1.0):
    """Bump adapted to the background (periodic on tori and nilmanifolds)."""
    if bg.coordinates is None:
        raise ConstructionError("bump_field needs a lattice background")
    if bg.kind == "heisenberg":
        from .heisenberg import nil_bump

        return nil_bump(bg.coordinates, center, width)
    if bg.periodic:
        return periodic_bump(bg.coordinates, bg.extent, center, width)
    return plain_bump(bg.coordinates, bg.extent, center, width)


def build_background(spec) -> BackgroundGeometry:
    """Build a lattice background from a :class:`BackgroundSpec` or a mapping."""
    if not isinstance(spec, BackgroundSpec):
        spec = BackgroundSpec(**dict(spec))
    if spec.kind not in KINDS:
        raise ConstructionError(f"kind: unknown background kind {spec.kind!r}")
    if spec.kind == "heisenberg":
        from .heisenberg import build_heisenberg

        return build_heisenberg(spec)

    law = _riemannian_law(3 if spec.n is None else int(spec.n))
    d = int(spec.d)
    if d < 1:
        raise ConstructionError(f"d: grid dimension must be >= 1, got {d}")
    shape = _per_axis(spec.N, d, "N", int)
    extent = _per_axis(spec.L, d, "L", float)
    if min(shape) < 3:
        raise ConstructionError(f"N: grid sizes must be >= 3 per axis, got {shape}")
    if min(extent) <= 0 or not all(math.isfinite(x) for x in extent):
        raise ConstructionError(f"L: side lengths must be positive, got {extent}")

    periodic = spec.kind != "box-with-boundary"
    if periodic:
        h = np.array([L / N for L, N in zip(extent, shape)])
    else:
        h = np.array([L / (N - 1) for L, N in zip(extent, shape)])
    grid = np.stack(np.meshgrid(*[np.arange(N) for N in shape], indexing="ij"), axis=-1)
    grid = grid.reshape(-1, d)
    coords = grid * h
    V = len(grid)
    cell = float(np.prod(h))

    edges, axes = _lattice_edges(shape, periodic)
    weights = cell / h[axes] ** 2
    lengths = h[axes].astype(float)
    vol = np.full(V, cell)
    bmask = np.zeros(V, dtype=bool)
    if not periodic:
        # dual-cell (ghost-reflection) weights: half factors on faces
        on_face = (grid == 0) | (grid == np.asarray(shape) - 1)
        bmask = on_face.any(axis=1)
        vol = vol * np.prod(np.where(on_face, 0.5, 1.0), axis=1)
        i, j = edges[:, 0], edges[:, 1]
        both = on_face[i] & on_face[j]  # shared faces in every axis
        for ax in range(d):
            shared = both[:, ax] & (axes != ax)
            weights = np.where(shared, 0.5 * weights, weights)

    edges = np.sort(edges, axis=1)
    if spec.kind == "flat-torus":
        if spec.r0 != 0 or spec.r0_bump_amplitude != 0 or spec.r0_noise != 0 or spec.r0_field is not None:
            raise ConstructionError("r0: flat-torus backgrounds carry zero curvature; use kind=synthetic")
        r0 = np.zeros(V)
    else:
        r0 = _curvature_field(spec, coords, extent, periodic, V)
    _check_connected(V, edges)
    _readonly(edges, weights, lengths, vol, r0, bmask, coords)
    return BackgroundGeometry(
        dimension_n=law.n, kind=spec.kind, edges=edges, edge_weights=weights,
        edge_lengths=lengths, vertex_volumes=vol, background_curvature=r0,
        boundary=bmask, law=law, coordinates=coords, shape=shape, extent=extent,
        periodic=periodic, meta={"spacing": tuple(h.tolist())},
    )


def _curvature_field(spec, coords, extent, periodic, V, bump=None):
    if spec.r0_field is not None:
        r0 = np.asarray(spec.r0_field, dtype=float).reshape(-1)
        if len(r0) != V:
            raise ConstructionError(f"r0_field: expected {V} values, got {len(r0)}")
    else:
        r0 = np.full(V, float(spec.r0))
        if spec.r0_bump_amplitude:
            if spec.r0_bump_width <= 0:
                raise ConstructionError("r0_bump_width must be positive")
            if bump is None:
                bump = periodic_bump if periodic else plain_bump
            r0 = r0 + spec.r0_bump_amplitude * bump(coords, extent, spec.r0_bump_center, spec.r0_bump_width)
        if spec.r0_noise:
            rng = np.random.default_rng(spec.seed)
            r0 = r0 + spec.r0_noise * rng.uniform(-1.0, 1.0, V)
    if not np.all(np.isfinite(r0)):
        raise ConstructionError("r0: background curvature must be finite")
    return r0.copy()


# --- conformal kernel -------------------------------------------------------

def _positive(u, V=None):
    u = np.asarray(u, dtype=float)
    if V is not None and u.shape != (V,):
        if u.ndim == 0:
            u = np.full(V, float(u))
        else:
            raise DomainError(f"conformal factor has shape {u.shape}, expected ({V},)")
    if not np.all(u > 0) or not np.all(np.isfinite(u)):
        raise DomainError("conformal factor must be finite and strictly positive")
    return u


def scalar_curvature(bg: BackgroundGeometry, u) -> np.ndarray:
    """Curvature of the conformal metric with factor ``u``."""
    u = _positive(u, bg.num_vertices)
    law = bg.law
    ip, ix, w, vol, r0 = bg.kernel_arrays
    return kernels.curvature(ip, ix, w, vol, r0, u, law.curvature_exponent, law.coupling)


def volume_element(bg: BackgroundGeometry, u):
    """Per-vertex conformal volume ``u^m v`` and its total."""
    u = _positive(u, bg.num_vertices)
    dv = u**bg.law.volume_exponent * bg.vertex_volumes
    return dv, float(dv.sum())


def average_scalar_curvature(bg: BackgroundGeometry, u) -> float:
    """Volume-weighted mean of the conformal curvature."""
    R = scalar_curvature(bg, u)
    dv, total = volume_element(bg, u)
    return float(np.dot(R, dv) / total)


def conformal_edge_weights(bg: BackgroundGeometry, u) -> np.ndarray:
    """Edge weights ``w_ij (u_i^2 + u_j^2) / 2`` of the conformal energy."""
    u = _positive(u, bg.num_vertices)
    i, j = bg.edges[:, 0], bg.edges[:, 1]
    return bg.edge_weights * 0.5 * (u[i] ** 2 + u[j] ** 2)


def conformal_forms(bg: BackgroundGeometry, u):
    """Energy operator ``A`` (sparse, PSD) and mass weights ``Mw``.

    ``f @ A @ f`` is the discrete ``int |grad_g f|^2 dV_g``; ``Mw`` is the
    conformal volume element.
    """
    u = _positive(u, bg.num_vertices)
    V = bg.num_vertices
    we = conformal_edge_weights(bg, u)
    i, j = bg.edges[:, 0], bg.edges[:, 1]
    W = sp.coo_matrix((np.concatenate([we, we]), (np.concatenate([i, j]), np.concatenate([j, i]))),
                      shape=(V, V)).tocsr()
    A = (sp.diags(np.asarray(W.sum(axis=1)).ravel()) - W).tocsr()
    Mw, _ = volume_element(bg, u)
    return A, Mw


def weighted_diameter(bg: BackgroundGeometry, u, *, chunk: int = 512) -> float:
    """Graph diameter for conformal edge lengths ``l_ij (u_i^e + u_j^e) / 2``."""
    u = _positive(u, bg.num_vertices)
    V = bg.num_vertices
    ue = u ** bg.law.length_exponent
    i, j = bg.edges[:, 0], bg.edges[:, 1]
    lengths = bg.edge_lengths * 0.5 * (ue[i] + ue[j])
    G = sp.coo_matrix((lengths, (i, j)), shape=(V, V)).tocsr()
    best = 0.0
    for start in range(0, V, chunk):
        D = csgraph.dijkstra(G, directed=False, indices=np.arange(start, min(V, start + chunk)))
        best = max(best, float(D.max()))
    return best


@dataclass(frozen=True, eq=False)
class ConformalState:
    """Positive conformal factor at a flow time, with derived quantities.

    The factor is copied and frozen on construction, so cached quantities can
    never go stale.
    """

    bg: BackgroundGeometry
    u: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        u = _positive(np.array(self.u, dtype=float, copy=True), self.bg.num_vertices).copy()
        u.setflags(write=False)
        object.__setattr__(self, "u", u)
        if not self.t >= 0:
            raise DomainError("flow time must be nonnegative")

    @cached_property
    def R(self) -> np.ndarray:
        return scalar_curvature(self.bg, self.u)

    @cached_property
    def dV(self) -> np.ndarray:
        return volume_element(self.bg, self.u)[0]

    @cached_property
    def V_total(self) -> float:
        return float(self.dV.sum())

    @cached_property
    def Rbar(self) -> float:
        return float(np.dot(self.R, self.dV) / self.V_total)
