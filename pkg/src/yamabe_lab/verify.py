"""Executable checks of the eigenvalue, curvature and diameter estimates.

Every inequality check reduces to an array of signed slacks (nonnegative when
the inequality holds). The verdict margin is the smallest slack and the check
passes when ``margin >= -tolerance``. With ``reverse=True`` every slack is
negated, which tests the opposite inequality with the same tolerance window;
a check whose reversed form also passes on a generic instance has a vacuous
window.

Checks never return ``pass`` when a hypothesis fails along the run: such runs
give ``inconclusive`` verdicts whose margin is NaN.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, PreconditionError
from .flow import FlowTrace
from .geometry import BackgroundGeometry, ConformalLaw, conformal_forms, scalar_curvature
from .spectral import OperatorDescriptor, first_eigen

STATUSES = ("pass", "fail", "inconclusive")
CHECK_IDS = (
    "sandwich", "prop4", "prop5", "prop6", "propA4", "rbar-bounds", "thm1", "thm2",
    "thm3", "integrals", "rbar-monotone", "volume", "nonneg-preserved", "log-bounds",
    "diameter", "monotonicity", "derivative",
)
PINCH_RTOL = 1e-6
RBAR_RTOL = 1e-8
VOLUME_RATE = 1e-6
STEP_RTOL = 1e-6
GAP_MIN = 1e-4


@dataclass(frozen=True)
class VerdictReport:
    """Outcome of one check.

    ``margin`` is the worst signed slack (positive means satisfied) and the
    check passes iff ``margin >= -tolerance``. Inconclusive verdicts carry a
    NaN margin.
    """

    check_id: str
    status: str
    margin: float
    tolerance: float
    details: dict = field(default_factory=dict)
    anchor: str = ""

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"unknown verdict status {self.status!r}")

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    @property
    def inconclusive(self) -> bool:
        return self.status == "inconclusive"

    def line(self) -> str:
        """One report line: id, status, margin, tolerance, anchor."""
        return (f"{self.check_id}\t{self.status}\t{self.margin:.6e}\t"
                f"{self.tolerance:.6e}\t{self.anchor}")


def _verdict(check_id, slacks, tol, anchor, reverse=False, **details):
    s = np.atleast_1d(np.asarray(slacks, dtype=float))
    if reverse:
        s = -s
    if np.ndim(tol) > 0:
        # slacks with their own tolerances are reported in units of tolerance
        s = s / np.asarray(tol, dtype=float)
        tol = 1.0
        details["normalized"] = True
    if len(s) == 0:
        return inconclusive(check_id, "no samples to check", anchor, tol)
    k = int(np.argmin(s))
    margin = float(s[k])
    status = "pass" if margin >= -tol else "fail"
    details.setdefault("worst_index", k)
    details["reversed"] = bool(reverse)
    return VerdictReport(check_id, status, margin, float(tol), details, anchor)


def inconclusive(check_id, reason, anchor="", tol=math.nan, **details):
    details["reason"] = reason
    return VerdictReport(check_id, "inconclusive", math.nan, float(tol), details, anchor)


def trace_law(trace: FlowTrace) -> ConformalLaw:
    """Conformal law matching the geometry recorded in a trace."""
    if trace.geometry == "cr":
        return ConformalLaw.cr(trace.n)
    return ConformalLaw.riemannian(trace.n)


def _arrays(trace):
    return (np.asarray(trace.t, dtype=float), np.asarray(trace.minR, dtype=float),
            np.asarray(trace.maxR, dtype=float), np.asarray(trace.Rbar, dtype=float))


def _require_negative(trace):
    if len(trace) == 0:
        raise PreconditionError("empty trace")
    if not trace.maxR[0] < 0:
        raise PreconditionError(f"requires max R(0) < 0, got {trace.maxR[0]:g}")


def _require_mode(trace, mode):
    if trace.mode != mode:
        raise PreconditionError(f"requires a {mode} trace, got {trace.mode}")


def _pinch_tol(trace):
    return PINCH_RTOL * abs(trace.minR[0])


def sandwich_constant(min0: float, max0: float, law: ConformalLaw) -> float:
    """Exponent ``c`` of the eigenvalue sandwich; nonnegative when ``min0 <= max0 < 0``."""
    if not max0 < 0:
        raise PreconditionError(f"requires max R(0) < 0, got {max0:g}")
    return law.sandwich_coefficient * (min0 / max0 - 1.0)


# --- curvature pinching -----------------------------------------------------

def max_negative_check(trace: FlowTrace, *, reverse=False) -> VerdictReport:
    """``max R(t) < 0`` at every sample."""
    _require_negative(trace)
    _, _, mx, _ = _arrays(trace)
    return _verdict("prop4", -mx, 0.0, "max R(t) < 0", reverse)


def max_bound_check(trace: FlowTrace, *, reverse=False) -> VerdictReport:
    """``max R(t) <= max R(0)`` at every sample."""
    _require_negative(trace)
    _, _, mx, _ = _arrays(trace)
    return _verdict("prop5", mx[0] - mx, _pinch_tol(trace), "max R(t) <= max R(0)", reverse)


def min_bound_check(trace: FlowTrace, *, reverse=False) -> VerdictReport:
    """``min R(t) >= min R(0)`` at every sample."""
    _require_negative(trace)
    _, mn, _, _ = _arrays(trace)
    return _verdict("prop6", mn - mn[0], _pinch_tol(trace), "min R(t) >= min R(0)", reverse)


def cr_pinching_check(trace: FlowTrace, *, reverse=False) -> VerdictReport:
    """``min R(0) <= min R(t) <= max R(t) <= max R(0) < 0`` for CR runs."""
    if trace.geometry != "cr":
        raise PreconditionError("requires a CR trace")
    _require_negative(trace)
    _, mn, mx, _ = _arrays(trace)
    slacks = np.concatenate([mn - mn[0], mx - mn, mx[0] - mx, -mx])
    return _verdict("propA4", slacks, _pinch_tol(trace),
                    "min R(0) <= min R(t) <= max R(t) <= max R(0) < 0", reverse)


def rbar_bounds_check(trace: FlowTrace, *, reverse=False) -> VerdictReport:
    """``min R(0) <= Rbar(t) <= max R(0)`` at every sample."""
    _require_negative(trace)
    _, mn, mx, rb = _arrays(trace)
    slacks = np.concatenate([rb - mn[0], mx[0] - rb])
    return _verdict("rbar-bounds", slacks, _pinch_tol(trace),
                    "min R(0) <= Rbar(t) <= max R(0)", reverse)


def nonneg_preserved_check(trace: FlowTrace, *, reverse=False) -> VerdictReport:
    """Unnormalized flow: ``min R(0) >= 0`` implies ``min R(t) >= 0``."""
    _require_mode(trace, "unnormalized")
    _, mn, _, _ = _arrays(trace)
    if not mn[0] >= 0:
        raise PreconditionError(f"requires min R(0) >= 0, got {mn[0]:g}")
    tol = PINCH_RTOL * max(1.0, float(np.max(np.abs(trace.maxR))))
    return _verdict("nonneg-preserved", mn, tol, "min R(t) >= 0", reverse)


# --- integral bounds --------------------------------------------------------

def _integral_slacks(trace, upper):
    _, mn, mx, rb = _arrays(trace)
    spread = mx[0] - mn[0]
    if upper:
        bound = rb[0] + spread + mx[0] * np.asarray(trace.Iplus)
        return bound - mx
    bound = rb[0] - spread + mx[0] * np.asarray(trace.Iminus)
    return mn - bound


def _integral_tol(trace):
    # trapezoid accumulation error of the integrals enters scaled by |max R(0)|
    return _pinch_tol(trace) + 1e-6 * abs(trace.maxR[0]) * max(1.0, trace.t[-1])


def upper_integral_check(trace: FlowTrace, *, reverse=False) -> VerdictReport:
    """``R(t) <= Rbar(0) + (max0 - min0) + max0 * I+(t)`` at every sample."""
    _require_negative(trace)
    cid = "thm1" if trace.geometry != "cr" else "thm3"
    return _verdict(cid, _integral_slacks(trace, True), _integral_tol(trace),
                    "max R(t) <= Rbar(0) + (max R(0) - min R(0)) + max R(0) I+(t)", reverse)


def lower_integral_check(trace: FlowTrace, *, reverse=False) -> VerdictReport:
    """``R(t) >= Rbar(0) - (max0 - min0) + max0 * I-(t)`` at every sample."""
    _require_negative(trace)
    cid = "thm2" if trace.geometry != "cr" else "thm3"
    return _verdict(cid, _integral_slacks(trace, False), _integral_tol(trace),
                    "min R(t) >= Rbar(0) - (max R(0) - min R(0)) + max R(0) I-(t)", reverse)


def cr_integral_check(trace: FlowTrace, *, reverse=False) -> VerdictReport:
    """Both one-sided integral bounds on a CR run."""
    if trace.geometry != "cr":
        raise PreconditionError("requires a CR trace")
    _require_negative(trace)
    slacks = np.concatenate([_integral_slacks(trace, True), _integral_slacks(trace, False)])
    return _verdict("thm3", slacks, _integral_tol(trace),
                    "Rbar(0) -+ (max R(0) - min R(0)) + max R(0) I-+(t) brackets R(t)", reverse)


def integral_tail(trace: FlowTrace) -> float:
    """Truncation allowance ``convergence_tol * (t_end - t_conv)``."""
    if trace.t_converged is None or not math.isfinite(trace.convergence_tol):
        return 0.0
    t_end = trace.t_end if math.isfinite(trace.t_end) else trace.t_converged
    return trace.convergence_tol * max(0.0, t_end - trace.t_converged)


def integrals_check(trace: FlowTrace, *, reverse=False) -> VerdictReport:
    """``I+(inf) <= 2 (min0/max0 - 1)`` and ``-I-(inf) <= 2 (min0/max0 - 1)``.

    Needs a converged run; the remaining horizon is covered by
    :func:`integral_tail`.
    """
    _require_negative(trace)
    anchor = "I+(inf) <= 2 (min R(0)/max R(0) - 1) and -I-(inf) <= same"
    if trace.status != "converged":
        return inconclusive("integrals", f"trace status {trace.status}", anchor)
    bound = 2.0 * (trace.minR[0] / trace.maxR[0] - 1.0)
    ip = np.asarray(trace.Iplus)
    im = np.asarray(trace.Iminus)
    slacks = np.concatenate([bound - ip, bound + im])
    tol = integral_tail(trace) + 1e-6 * max(1.0, bound) + _pinch_tol(trace)
    return _verdict("integrals", slacks, tol, anchor, reverse, bound=bound,
                    Iplus=float(ip[-1]), Iminus=float(im[-1]))


# --- conservation and monotone average --------------------------------------

def rbar_monotone_check(trace: FlowTrace, *, reverse=False) -> VerdictReport:
    """Normalized flow: ``Rbar`` nonincreasing between samples."""
    _require_mode(trace, "normalized")
    rb = np.asarray(trace.Rbar)
    slacks = rb[:-1] - rb[1:]
    tol = RBAR_RTOL * float(np.max(np.abs(rb))) if len(rb) else 0.0
    return _verdict("rbar-monotone", slacks, tol, "Rbar(t) nonincreasing", reverse)


def volume_check(trace: FlowTrace, *, reverse=False) -> VerdictReport:
    """Normalized flow: relative volume drift at most ``1e-6`` per unit time."""
    _require_mode(trace, "normalized")
    anchor = "total volume conserved"
    if reverse:
        return inconclusive("volume", "conservation law has no reversed form", anchor, VOLUME_RATE)
    t = np.asarray(trace.t)
    vol = np.asarray(trace.volume)
    drift = np.abs(vol - vol[0]) / vol[0] / np.maximum(1.0, t)
    return _verdict("volume", -drift, VOLUME_RATE, anchor, drift=float(drift.max()))


# --- eigenvalue estimates ---------------------------------------------------

def sandwich_check(trace: FlowTrace, lambda0: float, lambdaY: float, *,
                   tol: float | None = None, reverse=False) -> VerdictReport:
    """``exp(-c) lam_Y <= lam_0 <= exp(c) lam_Y``.

    ``c`` comes from the initial curvature extrema recorded in ``trace``.
    The default tolerance is ``1e-8 max(1, |lam_Y|)``.
    """
    law = trace_law(trace)
    _require_negative(trace)
    c = sandwich_constant(trace.minR[0], trace.maxR[0], law)
    anchor = "exp(-c) lam(g_Y) <= lam(g_0) <= exp(c) lam(g_Y)"
    tol = 1e-8 * max(1.0, abs(lambdaY)) if tol is None else float(tol)
    if trace.status != "converged":
        return inconclusive("sandwich", f"trace status {trace.status}", anchor, tol, c=c)
    lo, hi = math.exp(-c) * lambdaY, math.exp(c) * lambdaY
    return _verdict("sandwich", [lambda0 - lo, hi - lambda0], tol, anchor, reverse, c=c,
                    lower=lo, upper=hi, lambda0=lambda0, lambdaY=lambdaY,
                    log_ratio=math.log(lambda0 / lambdaY) if lambda0 * lambdaY > 0 else math.nan)


def _band_tol(dt):
    return 1e-4 + 10.0 * dt


def log_band(law: ConformalLaw, minR, maxR, rbar):
    """Lower and upper bounds on ``d log lam / dt`` at one time."""
    e, m = law.energy_coefficient, law.mass_coefficient
    lower = -e * (maxR - rbar) + m * (minR - rbar)
    upper = -e * (minR - rbar) + m * (maxR - rbar)
    return lower, upper


def log_bounds_check(trace: FlowTrace, op_id: str | None = None, *, reverse=False) -> VerdictReport:
    """Difference quotients of ``log lam`` against the curvature band.

    The band is evaluated at both ends of each sampling interval and the
    wider of the two is used; tolerance ``1e-4 + 10 dt``.
    """
    _require_mode(trace, "normalized")
    law = trace_law(trace)
    op_id = _laplacian_op(trace, op_id)
    lam = np.asarray(trace.lam[op_id], dtype=float)
    if not np.all(lam > 0):
        raise DomainError(f"log-bounds needs positive eigenvalues for {op_id}")
    t, mn, mx, rb = _arrays(trace)
    dt = np.diff(t)
    quot = np.diff(np.log(lam)) / dt
    lo, hi = log_band(law, mn, mx, rb)
    lower = np.minimum(lo[:-1], lo[1:])
    upper = np.maximum(hi[:-1], hi[1:])
    tol = _band_tol(float(dt.max())) if len(dt) else _band_tol(0.0)
    anchor = "-e (max R - Rbar) + m (min R - Rbar) <= dlog lam/dt <= -e (min R - Rbar) + m (max R - Rbar)"
    return _verdict("log-bounds", np.concatenate([quot - lower, upper - quot]), tol, anchor,
                    reverse, op=op_id, coefficients=(law.energy_coefficient, law.mass_coefficient))


def _laplacian_op(trace, op_id):
    if op_id is not None:
        if op_id not in trace.lam:
            raise PreconditionError(f"operator {op_id} is not tracked")
        return op_id
    for k in trace.op_ids:
        if k.startswith("laplacian"):
            return k
    raise PreconditionError("trace tracks no laplacian")


def diameter_check(trace: FlowTrace, *, reverse=False) -> VerdictReport:
    """Diameter band ``(Rbar - max R)/2 <= dlog d/dt <= (Rbar - min R)/2`` and
    the endpoint comparison ``exp(-r) d_end <= d_0 <= exp(r) d_end`` with
    ``r = min R(0)/max R(0) - 1``."""
    _require_mode(trace, "normalized")
    _require_negative(trace)
    anchor = "(Rbar - max R)/2 <= dlog d/dt <= (Rbar - min R)/2; exp(-r) d_end <= d_0 <= exp(r) d_end"
    t, mn, mx, rb = _arrays(trace)
    d = np.asarray(trace.diameter, dtype=float)
    if not np.all(np.isfinite(d)) or not np.all(d > 0):
        return inconclusive("diameter", "diameter was not tracked", anchor)
    if trace.status != "converged":
        return inconclusive("diameter", f"trace status {trace.status}", anchor)
    dt = np.diff(t)
    quot = np.diff(np.log(d)) / dt
    lo = 0.5 * (rb - mx)
    hi = 0.5 * (rb - mn)
    lower = np.minimum(lo[:-1], lo[1:])
    upper = np.maximum(hi[:-1], hi[1:])
    band = np.concatenate([quot - lower, upper - quot])
    band_tol = _band_tol(float(dt.max())) if len(dt) else _band_tol(0.0)
    # endpoint |log(d_0/d_end)| <= r; the unobserved tail may move d by half the tail integral
    r = mn[0] / mx[0] - 1.0
    ratio = math.log(d[0] / d[-1])
    end = np.array([r - ratio, r + ratio])
    end_tol = 0.5 * integral_tail(trace) + 1e-9
    tol = np.concatenate([np.full(len(band), band_tol), np.full(2, end_tol)])
    return _verdict("diameter", np.concatenate([band, end]), tol, anchor, reverse, exponent=r,
                    log_ratio=ratio, band_tol=band_tol, end_tol=end_tol,
                    band_margin=float(band.min()) if len(band) else math.nan,
                    end_margin=float(end.min()))


# --- unnormalized flow: monotonicity and derivative -------------------------

def regime_holds(law: ConformalLaw, a: float, minR: float, maxR: float) -> str | None:
    """Which monotonicity regime ``(a, min R, max R)`` satisfies, if any.

    ``"i"`` needs ``0 <= a < a*`` and ``min R >= ratio max R >= 0``; ``"ii"``
    needs ``a >= a*`` and ``min R >= 0``, where ``a* = rate / diffusion``.
    """
    crit = law.critical_a
    if a >= crit:
        return "ii" if minR >= 0 else None
    if a >= 0 and maxR >= 0 and minR >= law.pinching_ratio * maxR:
        return "i"
    return None


def monotonicity_check(trace: FlowTrace, op: OperatorDescriptor | str, *,
                       regime: str | None = None, reverse=False) -> VerdictReport:
    """Nondecrease of the tracked eigenvalue along the unnormalized flow.

    Each step may drop by at most ``1e-6 max(1, |lam|)``. A sample outside the
    regime hypotheses makes the verdict inconclusive.
    """
    _require_mode(trace, "unnormalized")
    if isinstance(op, str):
        op = OperatorDescriptor.parse(op)
    if op.op_id not in trace.lam:
        raise PreconditionError(f"operator {op.op_id} is not tracked")
    law = trace_law(trace)
    a = op.a if op.kind == "schrodinger" else 0.0
    cid = f"monotonicity[{op.op_id}]"
    anchor = f"lam({op.op_id}) nondecreasing"
    lam = np.asarray(trace.lam[op.op_id], dtype=float)
    flags = trace.gap_warnings.get(op.op_id, [])
    for k, (mn, mx) in enumerate(zip(trace.minR, trace.maxR)):
        got = regime_holds(law, a, mn, mx)
        if got is None or (regime is not None and got != regime):
            return inconclusive(cid, "regime hypotheses fail", anchor,
                                first_violation=k, t=trace.t[k], op=op.op_id)
    scale = STEP_RTOL * np.maximum(1.0, np.abs(lam[:-1]))
    steps = np.diff(lam)
    v = _verdict(cid, steps, scale, anchor, reverse, op=op.op_id,
                 min_increment=float(steps.min()) if len(steps) else 0.0,
                 gap_warnings=list(flags))
    return v


def _derivative_terms(bg, u, R, f, a):
    i, j = bg.edges[:, 0], bg.edges[:, 1]
    u2 = u * u
    grad_R = float(np.sum(bg.edge_weights * 0.5 * (R[i] * u2[i] + R[j] * u2[j])
                          * (f[i] - f[j]) ** 2))
    _, Mw = conformal_forms(bg, u)
    rf2 = float(np.sum(R * f * f * Mw))
    r2f2 = float(np.sum(R * R * f * f * Mw))
    return grad_R + a * r2f2, rf2


def derivative_formula(bg: BackgroundGeometry, u, op: OperatorDescriptor, eig=None):
    """Predicted ``d lam/dt`` under the unnormalized flow, with the eigenpair.

    ``(2 D a - e) int R(|grad f|^2 + a R f^2) - (2 D a - m) lam int R f^2``
    evaluated with the discrete forms, ``e`` and ``m`` the energy and mass
    coefficients of the law.
    """
    law = bg.law
    a = op.a if op.kind == "schrodinger" else 0.0
    res = first_eigen(bg, u, op) if eig is None else eig
    R = scalar_curvature(bg, u)
    energy, rf2 = _derivative_terms(bg, u, R, np.asarray(res.f), a)
    two_da = 2.0 * law.diffusion * a
    value = (two_da - law.energy_coefficient) * energy - (two_da - law.mass_coefficient) * res.lam * rf2
    return value, res


def derivative_check(bg: BackgroundGeometry, trace: FlowTrace, op: OperatorDescriptor | str, *,
                     windows=None, gap_min: float = GAP_MIN, reverse=False) -> VerdictReport:
    """Centered differences of the tracked eigenvalue against the formula.

    ``windows`` lists middle sample indices; by default every interior sample
    whose neighbours are equally spaced. Tolerance ``0.02 + 10 dt^2`` on the
    relative error. ``reverse`` flips the sign of the prediction.
    """
    _require_mode(trace, "unnormalized")
    if isinstance(op, str):
        op = OperatorDescriptor.parse(op)
    if op.op_id not in trace.lam:
        raise PreconditionError(f"operator {op.op_id} is not tracked")
    if len(trace.states) != len(trace):
        raise PreconditionError("trace carries no conformal factors")
    cid = f"derivative[{op.op_id}]"
    anchor = f"d lam({op.op_id})/dt matches the curvature-weighted formula"
    t = np.asarray(trace.t)
    lam = np.asarray(trace.lam[op.op_id])
    gaps = np.asarray(trace.gap[op.op_id])
    if windows is None:
        windows = range(1, len(t) - 1)
    errs, used, dts = [], [], []
    for k in windows:
        if not 0 < k < len(t) - 1:
            raise PreconditionError(f"window {k} has no neighbours")
        h1, h2 = t[k] - t[k - 1], t[k + 1] - t[k]
        if abs(h1 - h2) > 1e-9 * h1:
            continue
        if any(gaps[j] < gap_min * max(1.0, abs(lam[j])) for j in (k - 1, k, k + 1)):
            continue
        fd = (lam[k + 1] - lam[k - 1]) / (h1 + h2)
        pred, res = derivative_formula(bg, trace.states[k], op)
        if reverse:
            pred = -pred
        scale = max(abs(pred), abs(fd), STEP_RTOL * max(1.0, abs(res.lam)))
        errs.append(abs(fd - pred) / scale)
        used.append(k)
        dts.append(h1)
    if not used:
        return inconclusive(cid, "no uniform window with an adequate eigen-gap", anchor)
    tol = 0.02 + 10.0 * max(dts) ** 2
    errs = np.asarray(errs)
    v = _verdict(cid, -errs, tol, anchor, False, windows=used,
                 max_rel_error=float(errs.max()), reversed_prediction=bool(reverse))
    return v


# --- chained lower bounds ---------------------------------------------------

@dataclass(frozen=True)
class ChainParams:
    """Inputs of the chained lower bounds.

    ``kappa`` is the (negative) Einstein constant, ``c`` the sandwich exponent
    and ``d`` the diameter (largest interior ball diameter for the boundary
    bound).
    """

    n: int
    kappa: float
    c: float
    d: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise DomainError(f"n: need an integer >= 2, got {self.n}")
        if not self.kappa < 0:
            raise DomainError(f"kappa: need kappa < 0, got {self.kappa}")
        if not self.c >= 0 or not math.isfinite(self.c):
            raise DomainError(f"c: need finite c >= 0, got {self.c}")
        if not self.d > 0 or not math.isfinite(self.d):
            raise DomainError(f"d: need finite d > 0, got {self.d}")


def chained_lower_bound(params: ChainParams, kind: str) -> float:
    """Lower bound for the first eigenvalue of the initial metric.

    ``kind="liyau"`` (closed manifolds) or ``kind="ling"`` (Dirichlet problem
    on manifolds with boundary).
    """
    n, k, c, d = params.n, params.kappa, params.c, params.d
    grow = math.exp(n * c / (n - 1)) * d * d
    if kind == "liyau":
        root = math.sqrt(1.0 + 4.0 * (n - 1) ** 2 * math.exp(c / (n - 1)) * d * d * abs(k))
        return math.exp(-1.0 - root) / ((n - 1) * grow)
    if kind == "ling":
        return 0.5 * (n - 1) * k / math.exp(c) + math.pi**2 / grow
    raise DomainError(f"kind: expected 'liyau' or 'ling', got {kind!r}")


# --- suites -----------------------------------------------------------------

TRACE_CHECKS = {
    "prop4": max_negative_check,
    "prop5": max_bound_check,
    "prop6": min_bound_check,
    "propA4": cr_pinching_check,
    "rbar-bounds": rbar_bounds_check,
    "thm1": upper_integral_check,
    "thm2": lower_integral_check,
    "thm3": cr_integral_check,
    "integrals": integrals_check,
    "rbar-monotone": rbar_monotone_check,
    "volume": volume_check,
    "nonneg-preserved": nonneg_preserved_check,
    "log-bounds": log_bounds_check,
    "diameter": diameter_check,
}


def run_trace_checks(trace: FlowTrace, ids, *, reverse=False) -> list:
    """Run trace-only checks; precondition failures become inconclusive."""
    out = []
    for cid in ids:
        try:
            fn = TRACE_CHECKS[cid]
        except KeyError:
            raise PreconditionError(f"{cid!r} is not a trace-only check") from None
        try:
            out.append(fn(trace, reverse=reverse))
        except PreconditionError as exc:
            out.append(inconclusive(cid, str(exc)))
    return out
