"""Yamabe-type flows of a conformal factor, trace accumulation and the
discrete fixed-point (constant curvature) solver.

Both the normalized flow ``du/dt = -kappa (R - Rbar) u`` and the unnormalized
flow ``du/dt = -kappa R u`` are advanced with classical RK4, recomputing the
curvature and its average at every stage. The exponents come from the
background's :class:`~yamabe_lab.geometry.ConformalLaw`, so the same code runs
Riemannian and CR flows. Boundary backgrounds carry the reflecting
(zero-flux) stencil, which is the discrete zero mean curvature condition.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from . import kernels
from .errors import (
    ConfigError,
    PositivityError,
    PreconditionError,
    SolverError,
    StiffnessError,
)
from .geometry import (
    BackgroundGeometry,
    ConformalState,
    _positive,
    conformal_forms,
    weighted_diameter,
)
from .spectral import DEFAULT_TOL, EigenTracker, OperatorDescriptor

MODES = ("normalized", "unnormalized")
MIN_DT = 1e-12
# explicit steps also resolve the reaction term: dt * max|R - Rbar| <= cfl * REACTION
REACTION = 0.05


@dataclass(frozen=True)
class FlowConfig:
    """Flow run parameters.

    ``dt`` fixes the step size and disables the adaptive choice (samples
    still land exactly on multiples of ``sample_dt``).
    """

    mode: str = "normalized"
    t_end: float = 1.0
    cfl: float = 0.5
    sample_dt: float = 0.1
    convergence_tol: float = 1e-7
    tracked_ops: tuple = ()
    deterministic: bool = True
    dt: float | None = None
    track_diameter: bool = True
    eig_tol: float = DEFAULT_TOL

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"flow.mode: expected one of {MODES}, got {self.mode!r}")
        if not (self.t_end > 0 and math.isfinite(self.t_end)):
            raise ConfigError(f"flow.t_end: must be positive, got {self.t_end}")
        if not (0 < self.cfl <= 1):
            raise ConfigError(f"flow.cfl: must lie in (0, 1], got {self.cfl}")
        if not self.sample_dt > 0:
            raise ConfigError(f"flow.sample_dt: must be positive, got {self.sample_dt}")
        if not self.convergence_tol > 0:
            raise ConfigError("flow.convergence_tol: must be positive")
        if self.dt is not None and not self.dt > 0:
            raise ConfigError("flow.dt: must be positive")
        ops = tuple(OperatorDescriptor.parse(o) if isinstance(o, str) else o
                    for o in self.tracked_ops)
        object.__setattr__(self, "tracked_ops", ops)


@dataclass
class FlowTrace:
    """Sampled time series of a flow run.

    Scalar columns are lists indexed by sample; ``lam`` and ``gap`` map an
    operator id to its column. ``states`` keeps the conformal factor at each
    sample so checks can re-evaluate eigenfunctions.
    """

    op_ids: list
    mode: str = "normalized"
    geometry: str = "riemannian"
    n: int = 3
    t: list = field(default_factory=list)
    lam: dict = field(default_factory=dict)
    gap: dict = field(default_factory=dict)
    minR: list = field(default_factory=list)
    maxR: list = field(default_factory=list)
    Rbar: list = field(default_factory=list)
    volume: list = field(default_factory=list)
    diameter: list = field(default_factory=list)
    Iplus: list = field(default_factory=list)
    Iminus: list = field(default_factory=list)
    states: list = field(default_factory=list)
    gap_warnings: dict = field(default_factory=dict)
    status: str = "running"
    t_converged: float | None = None
    steps: int = 0
    t_end: float = math.nan
    convergence_tol: float = math.nan

    def __post_init__(self):
        for k in self.op_ids:
            self.lam.setdefault(k, [])
            self.gap.setdefault(k, [])
            self.gap_warnings.setdefault(k, [])

    def __len__(self):
        return len(self.t)

    @property
    def columns(self) -> list:
        cols = ["t"]
        cols += [f"lambda[{k}]" for k in self.op_ids]
        cols += [f"gap[{k}]" for k in self.op_ids]
        return cols + ["minR", "maxR", "Rbar", "volume", "diameter", "Iplus", "Iminus"]

    def column(self, name: str) -> np.ndarray:
        if name.startswith("lambda["):
            return np.asarray(self.lam[name[7:-1]], dtype=float)
        if name.startswith("gap["):
            return np.asarray(self.gap[name[4:-1]], dtype=float)
        return np.asarray(getattr(self, name), dtype=float)

    def rows(self):
        cols = [self.column(c) for c in self.columns]
        return [[c[i] for c in cols] for i in range(len(self))]

    def to_csv(self, path=None) -> str:
        """CSV text with 17 significant digits (round-trips exactly)."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows():
            w.writerow([format(float(x), ".17g") for x in row])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, source) -> "FlowTrace":
        """Read a trace written by :meth:`to_csv` (``states`` are not stored)."""
        if isinstance(source, str) and "\n" not in source:
            with open(source, encoding="utf-8") as fh:
                source = fh.read()
        reader = csv.reader(io.StringIO(source))
        header = next(reader)
        data = [[float(x) for x in row] for row in reader if row]
        ops = [h[7:-1] for h in header if h.startswith("lambda[")]
        tr = cls(op_ids=ops)
        for j, name in enumerate(header):
            col = [row[j] for row in data]
            if name.startswith("lambda["):
                tr.lam[name[7:-1]] = col
            elif name.startswith("gap["):
                tr.gap[name[4:-1]] = col
            else:
                setattr(tr, name, col)
        tr.status = "loaded"
        return tr


# --- single steps -----------------------------------------------------------

def _check_mode(mode):
    if mode not in MODES:
        raise ConfigError(f"mode: expected one of {MODES}, got {mode!r}")


def _rk4(bg: BackgroundGeometry, u, dt, mode):
    law = bg.law
    ip, ix, w, vol, r0 = bg.kernel_arrays
    return kernels.rk4_step(ip, ix, w, vol, r0, u, float(dt), law.curvature_exponent,
                            law.coupling, law.flow_rate, law.volume_exponent,
                            mode == "normalized")


def flow_step(bg: BackgroundGeometry, state: ConformalState, dt: float, mode: str = "normalized"):
    """Advance ``state`` by one RK4 step of size ``dt``.

    Raises :class:`PositivityError` if any stage leaves the positive cone; the
    input state is never modified.
    """
    _check_mode(mode)
    if not dt > 0:
        raise ConfigError(f"dt: must be positive, got {dt}")
    u_new, status = _rk4(bg, state.u, dt, mode)
    if status:
        raise PositivityError(f"RK4 step of size {dt:g} left the positive cone")
    return ConformalState(bg, u_new, state.t + dt)


def _stats(bg, u):
    law = bg.law
    ip, ix, w, vol, r0 = bg.kernel_arrays
    R = kernels.curvature(ip, ix, w, vol, r0, u, law.curvature_exponent, law.coupling)
    dv = u**law.volume_exponent * vol
    total = float(dv.sum())
    return R, float(np.dot(R, dv) / total), total


def stable_dt(bg: BackgroundGeometry, u, R, rbar, cfg: FlowConfig) -> float:
    """Adaptive explicit step from the diffusive and reaction limits."""
    law = bg.law
    diff = law.diffusion * float(np.max(u**law.curvature_scaling)) * bg.laplacian_max_eigenvalue
    dt = cfg.cfl / (4.0 * diff) if diff > 0 else np.inf
    react = float(np.max(np.abs(R - rbar) if cfg.mode == "normalized" else np.abs(R)))
    if react > 0:
        dt = min(dt, cfg.cfl * REACTION / react)
    if not np.isfinite(dt):
        dt = cfg.sample_dt
    return dt


def run_flow(bg: BackgroundGeometry, u0, cfg: FlowConfig):
    """Run the flow from ``u0`` and return ``(final_state, trace)``.

    Samples are taken at ``t = k * sample_dt`` and at the stopping time.
    Normalized runs stop once ``sup|R - Rbar| < convergence_tol``.
    """
    u = _positive(np.array(u0, dtype=float, copy=True), bg.num_vertices).copy()
    law = bg.law
    ops = list(cfg.tracked_ops)
    for op in ops:
        op.validate_for(bg)
    trackers = [EigenTracker(bg, op, cfg.eig_tol) for op in ops]
    trace = FlowTrace(op_ids=[op.op_id for op in ops], mode=cfg.mode,
                      geometry=law.geometry, n=law.n, t_end=cfg.t_end,
                      convergence_tol=cfg.convergence_tol)
    normalized = cfg.mode == "normalized"

    def record(t, u, R, rbar, total, iplus, iminus):
        trace.t.append(t)
        for tr in trackers:
            res = tr(u, t)
            trace.lam[tr.op.op_id].append(res.lam)
            trace.gap[tr.op.op_id].append(res.gap)
            if res.gap_warning:
                trace.gap_warnings[tr.op.op_id].append(t)
        trace.minR.append(float(R.min()))
        trace.maxR.append(float(R.max()))
        trace.Rbar.append(rbar)
        trace.volume.append(total)
        trace.diameter.append(weighted_diameter(bg, u) if cfg.track_diameter else math.nan)
        trace.Iplus.append(iplus)
        trace.Iminus.append(iminus)
        u_copy = u.copy()
        u_copy.setflags(write=False)
        trace.states.append(u_copy)

    def converged(R, rbar):
        return normalized and float(np.max(np.abs(R - rbar))) < cfg.convergence_tol

    t = 0.0
    R, rbar, total = _stats(bg, u)
    iplus = iminus = 0.0
    record(t, u, R, rbar, total, iplus, iminus)
    if converged(R, rbar):
        trace.status, trace.t_converged = "converged", 0.0
        return ConformalState(bg, u, 0.0), trace

    k_sample = 1
    scale = 1.0
    trace.status = "t_end_reached"
    while t < cfg.t_end:
        t_next_sample = min(k_sample * cfg.sample_dt, cfg.t_end)
        dt = cfg.dt if cfg.dt is not None else stable_dt(bg, u, R, rbar, cfg)
        dt = min(dt * scale, t_next_sample - t)
        while True:
            u_new, status = _rk4(bg, u, dt, cfg.mode)
            if not status:
                break
            dt *= 0.5
            scale *= 0.5
            if dt < MIN_DT:
                trace.status = "aborted_positivity"
                raise StiffnessError(
                    f"step size fell below {MIN_DT:g} at t={t:.6g} without preserving positivity",
                    trace=trace)
        t_new = t + dt
        at_sample = t_next_sample - t_new <= 1e-12 * max(1.0, t_next_sample)
        if at_sample:
            t_new = t_next_sample
        R_new, rbar_new, total = _stats(bg, u_new)
        h = t_new - t
        iplus += 0.5 * h * ((R.max() - rbar) + (R_new.max() - rbar_new))
        iminus += 0.5 * h * ((R.min() - rbar) + (R_new.min() - rbar_new))
        t, u, R, rbar = t_new, u_new, R_new, rbar_new
        trace.steps += 1
        done = converged(R, rbar)
        if at_sample or done:
            record(t, u, R, rbar, total, float(iplus), float(iminus))
            if at_sample:
                k_sample += 1
        if done:
            trace.status, trace.t_converged = "converged", t
            break
        if at_sample and t_next_sample >= cfg.t_end:
            break
    return ConformalState(bg, u, t), trace


# --- diagnostics ------------------------------------------------------------

def curvature_evolution_residual(bg: BackgroundGeometry, states, mode: str = "normalized",
                                 *, rtol: float = 1e-9) -> np.ndarray:
    """Pointwise residual of the curvature evolution equation.

    Compares the centered difference of ``R`` over three equally spaced states
    with ``D Lap_g R + R (R - Rbar)`` (or ``+ R^2`` when unnormalized) at the
    middle state, where ``Lap_g = -diag(Mw)^-1 A``.
    """
    _check_mode(mode)
    if len(states) != 3:
        raise PreconditionError("need exactly three consecutive states")
    s0, s1, s2 = states
    dt1, dt2 = s1.t - s0.t, s2.t - s1.t
    if not (dt1 > 0 and abs(dt2 - dt1) <= rtol * dt1):
        raise PreconditionError(f"states are not uniformly spaced (dt={dt1:g}, {dt2:g})")
    dRdt = (s2.R - s0.R) / (dt1 + dt2)
    A, Mw = conformal_forms(bg, s1.u)
    R = s1.R
    lap_R = -(A @ R) / Mw
    react = R * (R - s1.Rbar) if mode == "normalized" else R * R
    return dRdt - (bg.law.diffusion * lap_R + react)


# --- fixed point ------------------------------------------------------------

def solve_yamabe(bg: BackgroundGeometry, target_volume: float | None = None,
                 tol: float = 1e-10, *, max_iter: int = 100, u_init=None):
    """Constant-curvature conformal factor in the negative case.

    Solves ``-c L0 u + R0 u = lam u^p`` together with the volume constraint
    ``sum u^m v = target_volume`` by Newton's method on ``(u, lam)`` with a
    positivity-preserving backtracking line search. Returns ``(u, lam)``.
    """
    law = bg.law
    r0 = bg.background_curvature
    if not np.max(r0) < 0:
        raise PreconditionError("solve_yamabe requires max R0 < 0")
    v = bg.vertex_volumes
    V0 = float(v.sum())
    target = V0 if target_volume is None else float(target_volume)
    if not target > 0:
        raise PreconditionError("target_volume must be positive")
    p, c, m = law.curvature_exponent, law.coupling, law.volume_exponent
    K = bg.stiffness  # v * (-L0)

    def residual(u, lam):
        eq = c * (K @ u) / v + r0 * u - lam * u**p
        return eq, float(np.dot(u**m, v) - target)

    if u_init is None:
        u = np.full(bg.num_vertices, (target / V0) ** (1.0 / m))
    else:
        u = _positive(np.array(u_init, dtype=float), bg.num_vertices).copy()
    R = (c * (K @ u) / v + r0 * u) * u ** (-p)
    lam = float(np.dot(R, u**m * v) / np.dot(u**m, v))

    def merit(u, lam):
        # dividing by u^p turns the equation residual into a curvature mismatch
        eq, vol = residual(u, lam)
        return float(np.max(np.abs(eq * u ** (-p)))), abs(vol) / target

    best = merit(u, lam)
    for _ in range(max_iter):
        eq, vol = residual(u, lam)
        if best[0] <= tol and best[1] <= tol:
            return u, lam
        J = sp.bmat([
            [c * K + sp.diags(v * (r0 - p * lam * u ** (p - 1))),
             sp.csr_matrix((-v * u**p)[:, None])],
            [sp.csr_matrix((m * u ** (m - 1) * v)[None, :]), None],
        ]).tocsc()
        rhs = -np.concatenate([v * eq, [vol]])
        step = spsolve(J, rhs)
        du, dlam = step[:-1], float(step[-1])
        alpha = 1.0
        while alpha > 1e-10:
            u_try = u + alpha * du
            if np.all(u_try > 0):
                cand = merit(u_try, lam + alpha * dlam)
                if max(cand[0], cand[1]) < max(best) or (cand[0] <= tol and cand[1] <= tol):
                    break
            alpha *= 0.5
        else:
            raise SolverError("Newton line search stagnated", best_residual=max(best))
        u, lam = u_try, lam + alpha * dlam
        best = cand
    if best[0] <= tol and best[1] <= tol:
        return u, lam
    raise SolverError(f"Newton did not converge in {max_iter} iterations", best_residual=max(best))
