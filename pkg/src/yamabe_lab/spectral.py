"""First eigenpairs of conformal Laplacian and Schrödinger pencils.

The generalized problem ``A f = lam diag(Mw) f`` is solved by shift-invert
block subspace iteration with a Rayleigh-Ritz projection. Each sweep
projects onto a short block Krylov space of the shift-inverted operator. The
initial shift sits below a guaranteed lower bound of the spectrum; it is raised
toward the leading Ritz value only when an inertia count proves it still lies
below every admissible eigenvalue. Constants are removed by an explicit
Mw-orthogonal projection on every iteration when the operator is a Laplacian
without Dirichlet conditions.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import DescriptorError, SolverError
from .geometry import BackgroundGeometry, conformal_forms, scalar_curvature, _positive

KINDS = ("laplacian", "schrodinger")
BCS = ("closed", "dirichlet", "neumann")
DENSE_LIMIT = 4096
DEFAULT_TOL = 1e-9
GAP_WARNING = 1e-6


@dataclass(frozen=True)
class OperatorDescriptor:
    """Operator ``-Lap_g + a R_g`` with a boundary condition.

    ``kind="laplacian"`` ignores ``a``. Identifiers look like
    ``laplacian/closed`` or ``schrodinger(a=0.125)/neumann``.
    """

    kind: str = "laplacian"
    a: float = 0.0
    bc: str = "closed"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DescriptorError(f"kind: unknown operator kind {self.kind!r}")
        if self.bc not in BCS:
            raise DescriptorError(f"bc: unknown boundary condition {self.bc!r}")
        a = float(self.a)
        if not np.isfinite(a):
            raise DescriptorError("a: coefficient must be finite")
        object.__setattr__(self, "a", 0.0 if self.kind == "laplacian" else a)

    @property
    def deflates_constants(self) -> bool:
        return self.kind == "laplacian" and self.bc != "dirichlet"

    @property
    def op_id(self) -> str:
        if self.kind == "laplacian":
            return f"laplacian/{self.bc}"
        return f"schrodinger(a={self.a:.17g})/{self.bc}"

    @classmethod
    def parse(cls, text: str) -> "OperatorDescriptor":
        """Inverse of :attr:`op_id`; also accepts ``schrodinger:0.5/closed``."""
        m = re.fullmatch(
            r"\s*(laplacian|schrodinger)(?:\(a=([^)]*)\)|:([^/]*))?(?:/(\w+))?\s*", text
        )
        if not m:
            raise DescriptorError(f"cannot parse operator {text!r}")
        kind, a1, a2, bc = m.groups()
        a = a1 if a1 is not None else a2
        try:
            a = float(a) if a is not None else 0.0
        except ValueError as exc:
            raise DescriptorError(f"a: bad coefficient in {text!r}") from exc
        return cls(kind=kind, a=a, bc=bc or "closed")

    def validate_for(self, bg: BackgroundGeometry) -> None:
        if self.bc == "closed" and bg.has_boundary:
            raise DescriptorError("bc=closed on a background with boundary; use dirichlet or neumann")
        if self.bc != "closed" and not bg.has_boundary:
            raise DescriptorError(f"bc={self.bc} requires a background with boundary")


@dataclass(frozen=True, eq=False)
class SpectralResult:
    """One eigenpair with its certificates.

    ``f`` lives on all vertices (zero on the boundary for Dirichlet problems)
    and satisfies ``f @ (Mw * f) == 1``.
    """

    lam: float
    f: np.ndarray
    residual: float
    normalization: float
    gap: float
    op: OperatorDescriptor
    iterations: int = 0
    mean: float = 0.0

    @property
    def gap_warning(self) -> bool:
        return self.gap < GAP_WARNING * max(abs(self.lam), 1e-300)


@dataclass(frozen=True, eq=False)
class Pencil:
    """Operator matrices restricted to the admissible vertices."""

    A: sp.csr_matrix
    Mw: np.ndarray
    free: np.ndarray
    R: np.ndarray
    lower_bound: float


def operator_pencil(bg: BackgroundGeometry, u, op: OperatorDescriptor) -> Pencil:
    """Assemble ``(A_op, Mw)`` on the admissible vertex set."""
    op.validate_for(bg)
    A, Mw = conformal_forms(bg, u)
    R = scalar_curvature(bg, u)
    if op.bc == "dirichlet":
        free = bg.interior
        if len(free) == 0:
            raise DescriptorError("bc=dirichlet leaves no interior vertices")
    else:
        free = np.arange(bg.num_vertices)
    lower = 0.0
    if op.kind == "schrodinger":
        A = (A + sp.diags(op.a * R * Mw)).tocsr()
        lower = float(np.min(op.a * R[free]))
    if op.bc == "dirichlet":
        A = A[free][:, free].tocsr()
    return Pencil(A=A, Mw=Mw[free], free=free, R=R, lower_bound=lower)


def _project(X, Mw, deflate):
    if deflate:
        X = X - np.outer(np.ones(len(Mw)), (Mw @ X) / Mw.sum())
    return X


def _orth(X, s=None):
    """Orthonormal basis of span(X); in the ``diag(s**2)`` inner product if given.

    Orthonormalizing in the mass inner product matters when the weights span
    several decades: a Euclidean basis then loses the small-mass components
    of the eigenvector to roundoff and the Ritz residual stalls.
    """
    if s is not None:
        return _orth(s[:, None] * X) / s[:, None]
    Q, r = np.linalg.qr(X)
    d = np.abs(np.diag(r))
    keep = d > 1e-12 * max(d.max(initial=0.0), 1e-300)
    return Q[:, keep]


def _factor(A, Mw, sigma):
    """Symmetric-mode LU of ``A - sigma diag(Mw)`` and its count of nonpositive pivots.

    Diagonal pivoting under a symmetric permutation is an LDL^T factorization,
    so the pivot signs give the inertia of the shifted pencil.
    """
    lu = splu((A - sp.diags(sigma * Mw)).tocsc(), permc_spec="MMD_AT_PLUS_A",
              diag_pivot_thresh=0.0, options=dict(SymmetricMode=True))
    return lu, int(np.count_nonzero(lu.U.diagonal() <= 0))


def _fix_sign(f):
    k = int(np.argmax(np.abs(f)))
    return -f if f[k] < 0 else f


def first_eigen(
    bg: BackgroundGeometry,
    u,
    op: OperatorDescriptor = OperatorDescriptor(),
    tol: float = DEFAULT_TOL,
    *,
    warm_start: np.ndarray | None = None,
    block: int = 12,
    depth: int = 4,
    seed: int = 0,
) -> SpectralResult:
    """Smallest admissible eigenpair of the pencil of ``op`` at factor ``u``.

    For Laplacians without Dirichlet conditions the constants are excluded,
    so the first nonzero eigenvalue is returned. Iteration stops once the
    mass-norm residual is below ``tol * max(1, |lam|)``.
    """
    u = _positive(u, bg.num_vertices)
    P = operator_pencil(bg, u, op)
    A, Mw = P.A, P.Mw
    nfree = len(Mw)
    deflate = op.deflates_constants
    dim = nfree - (1 if deflate else 0)
    if dim < 1:
        raise DescriptorError("admissible space is empty")
    b = min(block, dim)

    scale = float(np.mean(A.diagonal() / Mw))
    sigma = P.lower_bound - max(1e-6 * scale, 1e-12)
    lu, _ = _factor(A, Mw, sigma)

    rng = np.random.default_rng(seed)
    X = rng.standard_normal((nfree, b))
    if warm_start is not None:
        w = np.asarray(warm_start, dtype=float)
        if len(w) == bg.num_vertices:
            w = w[P.free]
        X[:, 0] = w
    sq = np.sqrt(Mw)
    X = _orth(_project(X, Mw, deflate), sq)

    budget = 10 * bg.num_vertices
    applications = 0
    best = np.inf
    it = 0
    refactors = 0
    while True:
        it += 1
        # Rayleigh-Ritz on the block Krylov space [X, T X, ..., T^depth X]
        blocks, Z = [X], X
        for _ in range(depth):
            Z = _project(lu.solve(Mw[:, None] * Z), Mw, deflate)
            Z = Z / np.linalg.norm(Z, axis=0)
            blocks.append(Z)
        applications += depth * X.shape[1]
        Y = _orth(np.hstack(blocks), sq)
        if deflate:
            # orthonormalizing nearly dependent columns leaks roundoff constants
            Y = _orth(_project(Y, Mw, True), sq)
        Aq = Y.T @ (A @ Y)
        Mq = Y.T @ (Mw[:, None] * Y)
        theta, C = sla.eigh(0.5 * (Aq + Aq.T), 0.5 * (Mq + Mq.T))
        X = Y @ C[:, :b]
        f = X[:, 0]
        lam = float(theta[0])
        r = A @ f - lam * (Mw * f)
        res = float(np.sqrt(np.dot(r, r / Mw)))
        best = min(best, res)
        if res <= tol * max(1.0, abs(lam)):
            break
        # Raise the shift toward theta[0] when the inertia count certifies the
        # new shift still lies below the admissible spectrum (the constant
        # mode contributes the single expected negative pivot when deflating).
        if len(theta) > 1 and refactors < 8:
            target = theta[0] - res - 0.05 * (theta[1] - theta[0])
            if target - sigma > 0.5 * (theta[0] - sigma):
                refactors += 1
                try:
                    lu_new, negatives = _factor(A, Mw, target)
                    below = negatives == (1 if deflate else 0)
                except RuntimeError:
                    below = False
                if below:
                    lu, sigma = lu_new, target
        if applications >= budget:
            raise SolverError(
                f"eigen-solve for {op.op_id} did not reach residual {tol:g} "
                f"within {budget} applications", best_residual=best)

    f = _fix_sign(f / np.sqrt(np.dot(f, Mw * f)))
    gap = float(theta[1] - theta[0]) if len(theta) > 1 else np.inf
    full = np.zeros(bg.num_vertices)
    full[P.free] = f
    full.setflags(write=False)
    return SpectralResult(
        lam=lam, f=full, residual=res, normalization=float(np.dot(f, Mw * f)),
        gap=gap, op=op, iterations=it, mean=float(np.dot(Mw, f)),
    )


def rayleigh_quotient(bg: BackgroundGeometry, u, op: OperatorDescriptor, f) -> float:
    """``f^T A_op f / f^T diag(Mw) f`` on the admissible vertices."""
    P = operator_pencil(bg, u, op)
    g = np.asarray(f, dtype=float)[P.free]
    return float(g @ (P.A @ g) / np.dot(g, P.Mw * g))


# --- dense oracle -----------------------------------------------------------

def _dense_pencil(bg: BackgroundGeometry, u, op: OperatorDescriptor):
    """Brute-force dense assembly, independent of the sparse code path."""
    V = bg.num_vertices
    if V > DENSE_LIMIT:
        raise DescriptorError(f"dense oracle limited to {DENSE_LIMIT} vertices, got {V}")
    op.validate_for(bg)
    u = _positive(u, V)
    law = bg.law
    L0 = np.zeros((V, V))
    A = np.zeros((V, V))
    for (i, j), w in zip(bg.edges.tolist(), bg.edge_weights.tolist()):
        L0[i, j] += w
        L0[j, i] += w
        L0[i, i] -= w
        L0[j, j] -= w
        we = w * (u[i] ** 2 + u[j] ** 2) / 2.0
        A[i, j] -= we
        A[j, i] -= we
        A[i, i] += we
        A[j, j] += we
    L0 /= bg.vertex_volumes[:, None]
    Mw = np.array([u[i] ** law.volume_exponent * bg.vertex_volumes[i] for i in range(V)])
    if op.kind == "schrodinger":
        lap_u = L0 @ u
        R = u ** (-law.curvature_exponent) * (
            -law.coupling * lap_u + bg.background_curvature * u)
        A += np.diag(op.a * R * Mw)
    if op.bc == "dirichlet":
        keep = ~bg.boundary
        A = A[np.ix_(keep, keep)]
        Mw = Mw[keep]
    return A, Mw


def dense_oracle(bg: BackgroundGeometry, u, op: OperatorDescriptor, k: int | None = None):
    """The ``k`` smallest eigenvalues of the dense pencil, ascending.

    The full admissible-vertex pencil is solved, so Laplacians without
    Dirichlet conditions include the zero eigenvalue of the constants.
    """
    A, Mw = _dense_pencil(bg, u, op)
    ev = sla.eigh(A, np.diag(Mw), eigvals_only=True)
    return ev if k is None else ev[:k]


def oracle_first(bg: BackgroundGeometry, u, op: OperatorDescriptor) -> float:
    """Dense counterpart of :func:`first_eigen` (skips the constant mode)."""
    ev = dense_oracle(bg, u, op, 2)
    return float(ev[1] if op.deflates_constants else ev[0])


# --- tracking along a flow --------------------------------------------------

@dataclass
class EigenTracker:
    """Follows the first eigenpair of one operator along a flow.

    Each solve warm-starts from the previous eigenvector; solves whose gap
    falls below ``1e-6 |lam|`` are recorded in ``warnings``.
    """

    bg: BackgroundGeometry
    op: OperatorDescriptor
    tol: float = DEFAULT_TOL
    last: SpectralResult | None = None
    warnings: list = field(default_factory=list)

    def __call__(self, u, t: float = 0.0) -> SpectralResult:
        res = first_eigen(self.bg, u, self.op, self.tol,
                          warm_start=None if self.last is None else self.last.f)
        if res.gap_warning:
            self.warnings.append(t)
        self.last = res
        return res
