"""Command line entry point: ``yamabe-lab {run,verify,report}``.

Exit codes: 0 success, 1 a verification check failed, 2 solver error,
3 configuration error.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

from . import config as cfgmod
from . import verify
from .errors import (
    ConfigError,
    ConstructionError,
    DescriptorError,
    DomainError,
    PositivityError,
    PreconditionError,
    SolverError,
)
from .flow import FlowTrace, run_flow, solve_yamabe
from .geometry import build_background
from .spectral import OperatorDescriptor, first_eigen
from .svg import trace_plots

log = logging.getLogger("yamabe_lab")

EXIT_OK, EXIT_FAIL, EXIT_SOLVER, EXIT_CONFIG = 0, 1, 2, 3
META_KEYS = ("mode", "geometry", "n", "status", "t_converged", "t_end", "convergence_tol", "steps")
NEEDS_LAPLACIAN = {"sandwich", "log-bounds"}
LIVE_ONLY = {"sandwich", "monotonicity", "derivative"}


# --- trace files ------------------------------------------------------------

def write_meta(trace: FlowTrace, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for k in META_KEYS:
            v = getattr(trace, k)
            fh.write(f"{k} = {'' if v is None else (format(v, '.17g') if isinstance(v, float) else v)}\n")


def read_trace(csv_path: str) -> FlowTrace:
    """Load a trace CSV plus its ``.meta`` sidecar when present."""
    if not os.path.exists(csv_path):
        raise ConfigError(f"trace file not found: {csv_path}")
    trace = FlowTrace.from_csv(csv_path)
    meta_path = csv_path + ".meta"
    if os.path.exists(meta_path):
        with open(meta_path, encoding="utf-8") as fh:
            raw = cfgmod.parse_text(fh.read())
        trace.mode = raw.get("mode", trace.mode)
        trace.geometry = raw.get("geometry", trace.geometry)
        trace.n = int(raw.get("n", trace.n))
        trace.status = raw.get("status", trace.status)
        tc = raw.get("t_converged", "")
        trace.t_converged = float(tc) if tc else None
        trace.t_end = float(raw.get("t_end", "nan"))
        trace.convergence_tol = float(raw.get("convergence_tol", "nan"))
        trace.steps = int(raw.get("steps", 0))
    return trace


def write_outputs(run: cfgmod.RunConfig, trace: FlowTrace) -> str:
    os.makedirs(run.out_dir, exist_ok=True)
    path = run.path(run.trace_file)
    trace.to_csv(path)
    write_meta(trace, path + ".meta")
    if run.plots:
        for stem, doc in trace_plots(trace).items():
            with open(run.path(f"{stem}.svg"), "w", encoding="utf-8", newline="") as fh:
                fh.write(doc)
    return path


# --- pipeline ---------------------------------------------------------------

def _default_laplacian(bg):
    return OperatorDescriptor("laplacian", 0.0, "dirichlet" if bg.has_boundary else "closed")


def execute(run: cfgmod.RunConfig):
    """Build the background, run the flow and return ``(bg, u0, final, trace)``."""
    bg = build_background(run.background)
    u0 = run.initial.build(bg, run.seed)
    flow = run.flow
    ops = list(flow.tracked_ops)
    if NEEDS_LAPLACIAN & set(run.checks) and not any(o.kind == "laplacian" for o in ops):
        ops.append(_default_laplacian(bg))
        flow = replace(flow, tracked_ops=tuple(ops))
    final, trace = run_flow(bg, u0, flow)
    return bg, u0, final, trace


def _sandwich(bg, trace, run, reverse):
    op_id = next((k for k in trace.op_ids if k.startswith("laplacian")), None)
    op = OperatorDescriptor.parse(op_id)
    u_y, _ = solve_yamabe(bg, target_volume=trace.volume[0])
    lam_y = first_eigen(bg, u_y, op).lam
    return verify.sandwich_check(trace, trace.lam[op_id][0], lam_y,
                                 tol=run.tolerances.get("sandwich"), reverse=reverse)


def _jobs(bg, trace, run, reverse):
    jobs = []
    for cid in run.checks:
        if cid == "sandwich":
            jobs.append((cid, lambda: _sandwich(bg, trace, run, reverse)))
        elif cid == "monotonicity":
            for k in trace.op_ids:
                jobs.append((f"{cid}[{k}]", lambda k=k: verify.monotonicity_check(
                    trace, k, regime=run.regime, reverse=reverse)))
        elif cid == "derivative":
            for k in trace.op_ids:
                jobs.append((f"{cid}[{k}]", lambda k=k: verify.derivative_check(
                    bg, trace, k, reverse=reverse)))
        else:
            fn = verify.TRACE_CHECKS[cid]
            jobs.append((cid, lambda fn=fn: fn(trace, reverse=reverse)))
    return jobs


def _guard(cid, fn):
    try:
        return fn()
    except PreconditionError as exc:
        return verify.inconclusive(cid, str(exc))


def evaluate(bg, trace, run, *, reverse=False) -> list:
    """Run the configured checks; reports come back sorted by check id."""
    jobs = _jobs(bg, trace, run, reverse) if bg is not None else _offline_jobs(trace, run, reverse)
    if run.threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=run.threads) as pool:
            results = list(pool.map(lambda j: _guard(*j), jobs))
    else:
        results = [_guard(*j) for j in jobs]
    return sorted(results, key=lambda v: v.check_id)


def _offline_jobs(trace, run, reverse):
    jobs = []
    for cid in run.checks:
        if cid in LIVE_ONLY:
            if cid == "monotonicity":
                for k in trace.op_ids:
                    jobs.append((f"{cid}[{k}]", lambda k=k: verify.monotonicity_check(
                        trace, k, regime=run.regime, reverse=reverse)))
            else:
                jobs.append((cid, lambda cid=cid: verify.inconclusive(
                    cid, "needs a live run (use the verify subcommand)", "live run only")))
        else:
            fn = verify.TRACE_CHECKS[cid]
            jobs.append((cid, lambda fn=fn: fn(trace, reverse=reverse)))
    return jobs


def write_report(run, reports) -> str:
    os.makedirs(run.out_dir, exist_ok=True)
    path = run.path(run.report_file)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for v in reports:
            fh.write(v.line() + "\n")
    return path


def _exit_for(reports) -> int:
    return EXIT_FAIL if any(v.status == "fail" for v in reports) else EXIT_OK


# --- commands ---------------------------------------------------------------

def cmd_run(run: cfgmod.RunConfig) -> int:
    _, _, _, trace = execute(run)
    path = write_outputs(run, trace)
    log.info("status=%s samples=%d steps=%d trace=%s", trace.status, len(trace), trace.steps, path)
    return EXIT_OK


def cmd_verify(run: cfgmod.RunConfig, *, reverse=False) -> int:
    if not run.checks:
        raise ConfigError("checks.ids: verify needs at least one check")
    bg, _, _, trace = execute(run)
    write_outputs(run, trace)
    reports = evaluate(bg, trace, run, reverse=reverse)
    path = write_report(run, reports)
    for v in reports:
        print(v.line())
    log.info("report=%s", path)
    return _exit_for(reports)


def cmd_report(run: cfgmod.RunConfig, trace_path=None, *, reverse=False) -> int:
    trace = read_trace(trace_path or run.path(run.trace_file))
    if run.plots:
        os.makedirs(run.out_dir, exist_ok=True)
        for stem, doc in trace_plots(trace).items():
            with open(run.path(f"{stem}.svg"), "w", encoding="utf-8", newline="") as fh:
                fh.write(doc)
    reports = evaluate(None, trace, run, reverse=reverse)
    write_report(run, reports)
    for v in reports:
        print(v.line())
    return _exit_for(reports)


def _seed(text):
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="yamabe-lab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("run", "verify", "report"):
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, metavar="PATH")
        s.add_argument("--out", metavar="DIR")
        s.add_argument("--deterministic", action="store_true")
        s.add_argument("--threads", type=int, metavar="N")
        s.add_argument("--seed", type=_seed, metavar="U64")
        s.add_argument("--reverse-checks", action="store_true",
                       help="negate every inequality (debugging aid; should fail)")
        s.add_argument("-v", "--verbose", action="store_true")
        if name == "report":
            s.add_argument("--trace", metavar="PATH", help="trace CSV (default: <out>/<trace file>)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        run = cfgmod.load(args.config).with_overrides(
            out_dir=args.out, seed=args.seed, deterministic=args.deterministic,
            threads=args.threads)
        if args.command == "run":
            return cmd_run(run)
        if args.command == "verify":
            return cmd_verify(run, reverse=args.reverse_checks)
        return cmd_report(run, args.trace, reverse=args.reverse_checks)
    except (ConfigError, ConstructionError, DescriptorError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, PositivityError) as exc:
        detail = getattr(exc, "best_residual", math.nan)
        print(f"solver error: {exc} (best residual {detail:g})", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
