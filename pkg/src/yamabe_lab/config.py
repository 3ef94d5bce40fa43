"""Flat ``key = value`` run configuration with dotted section keys.

Example::

    # negative synthetic background
    background.kind = synthetic
    background.N = 8
    background.r0 = -6
    background.r0_bump_amplitude = 2
    initial.kind = constant
    flow.mode = normalized
    flow.t_end = 5
    flow.tracked_ops = laplacian/closed
    checks.ids = sandwich, prop4, prop5, prop6, thm1, thm2, log-bounds, diameter

Lines starting with ``#`` and blank lines are ignored. Lists are separated by
commas or semicolons. Unknown keys are configuration errors.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .errors import ConfigError
from .flow import FlowConfig
from .geometry import BackgroundGeometry, BackgroundSpec, bump_field
from .spectral import OperatorDescriptor

INITIAL_KINDS = ("constant", "gaussian-bump", "file")

_BG_FLOAT_LISTS = {"L"}
_FLOW_KEYS = {f.name for f in fields(FlowConfig)}
_BG_KEYS = {f.name for f in fields(BackgroundSpec)} - {"r0_field"}


@dataclass(frozen=True)
class InitialSpec:
    """Initial conformal factor: constant, gaussian bump over a constant, or file."""

    kind: str = "constant"
    value: float = 1.0
    amplitude: float = 0.0
    width: float = 1.0
    center: tuple | None = None
    path: str | None = None
    noise: float = 0.0

    def __post_init__(self):
        if self.kind not in INITIAL_KINDS:
            raise ConfigError(f"initial.kind: expected one of {INITIAL_KINDS}, got {self.kind!r}")
        if self.kind == "file" and not self.path:
            raise ConfigError("initial.path: required for kind=file")
        if not self.value > 0:
            raise ConfigError(f"initial.value: must be positive, got {self.value}")
        if not self.width > 0:
            raise ConfigError(f"initial.width: must be positive, got {self.width}")

    def build(self, bg: BackgroundGeometry, seed: int = 0) -> np.ndarray:
        V = bg.num_vertices
        if self.kind == "file":
            try:
                u = np.loadtxt(self.path, dtype=float).reshape(-1)
            except OSError as exc:
                raise ConfigError(f"initial.path: cannot read {self.path}: {exc}") from None
            except ValueError as exc:
                raise ConfigError(f"initial.path: malformed data in {self.path}: {exc}") from None
            if len(u) != V:
                raise ConfigError(f"initial.path: expected {V} values, got {len(u)}")
        else:
            u = np.full(V, float(self.value))
            if self.kind == "gaussian-bump" and self.amplitude:
                u = u + self.amplitude * bump_field(bg, self.center, self.width)
        if self.noise:
            rng = np.random.default_rng(seed)
            u = u * (1.0 + self.noise * rng.uniform(-1.0, 1.0, V))
        if not (np.all(np.isfinite(u)) and np.all(u > 0)):
            raise ConfigError("initial: conformal factor must be finite and positive")
        return u


@dataclass(frozen=True)
class RunConfig:
    """Everything a CLI run needs."""

    background: BackgroundSpec
    initial: InitialSpec
    flow: FlowConfig
    checks: tuple = ()
    tolerances: dict = field(default_factory=dict)
    regime: str | None = None
    out_dir: str = "."
    trace_file: str = "trace.csv"
    report_file: str = "report.txt"
    plots: bool = True
    seed: int = 0
    deterministic: bool = True
    threads: int = 1

    def with_overrides(self, *, out_dir=None, seed=None, deterministic=None, threads=None):
        kw = {}
        if out_dir is not None:
            kw["out_dir"] = out_dir
        if seed is not None:
            kw["seed"] = int(seed)
            kw["background"] = replace(self.background, seed=int(seed))
        if deterministic:
            kw["deterministic"] = True
            kw["flow"] = replace(self.flow, deterministic=True)
        if threads is not None:
            if threads < 1:
                raise ConfigError(f"--threads: must be >= 1, got {threads}")
            kw["threads"] = int(threads)
        return replace(self, **kw)

    def path(self, name: str) -> str:
        return os.path.join(self.out_dir, name)


def parse_text(text: str) -> dict:
    """Parse ``key = value`` lines into a dict of raw strings."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _list(value: str) -> list:
    return [s.strip() for s in value.replace(";", ",").split(",") if s.strip()]


def _float(key, value):
    try:
        x = float(value)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {value!r}") from None
    if math.isnan(x):
        raise ConfigError(f"{key}: NaN is not allowed")
    return x


def _int(key, value):
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {value!r}") from None


def _bool(key, value):
    v = value.lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {value!r}")


def _scalar_or_list(key, value, cast):
    items = _list(value)
    if len(items) == 1:
        return cast(key, items[0])
    return tuple(cast(key, x) for x in items)


def from_mapping(raw: dict, base_dir: str = ".") -> RunConfig:
    """Build a :class:`RunConfig` from parsed keys."""
    bg, init, flow, checks, tols = {}, {}, {}, [], {}
    top = {}
    for key, value in raw.items():
        section, _, name = key.partition(".")
        if section == "background" and name in _BG_KEYS:
            if name in ("kind",):
                bg[name] = value
            elif name in ("n", "d", "seed"):
                bg[name] = _int(key, value)
            elif name == "N":
                bg[name] = _scalar_or_list(key, value, _int)
            elif name == "r0_bump_center":
                bg[name] = tuple(_float(key, x) for x in _list(value))
            elif name in _BG_FLOAT_LISTS:
                bg[name] = _scalar_or_list(key, value, _float)
            else:
                bg[name] = _float(key, value)
        elif section == "initial":
            if name == "kind" or name == "path":
                init[name] = value
            elif name == "center":
                init[name] = tuple(_float(key, x) for x in _list(value))
            elif name in ("value", "amplitude", "width", "noise"):
                init[name] = _float(key, value)
            else:
                raise ConfigError(f"{key}: unknown key")
        elif section == "flow" and name in _FLOW_KEYS:
            if name == "mode":
                flow[name] = value
            elif name == "tracked_ops":
                try:
                    flow[name] = tuple(OperatorDescriptor.parse(s) for s in _list(value))
                except ValueError as exc:
                    raise ConfigError(f"{key}: {exc}") from None
            elif name in ("deterministic", "track_diameter"):
                flow[name] = _bool(key, value)
            elif name == "dt" and value.lower() in ("", "auto", "none"):
                flow[name] = None
            else:
                flow[name] = _float(key, value)
        elif section == "checks":
            if name == "ids":
                checks = _list(value)
            elif name.startswith("tolerance."):
                tols[name[len("tolerance."):]] = _float(key, value)
            elif name == "regime":
                top["regime"] = value or None
            else:
                raise ConfigError(f"{key}: unknown key")
        elif section == "output":
            if name == "dir":
                top["out_dir"] = value
            elif name == "trace":
                top["trace_file"] = value
            elif name == "report":
                top["report_file"] = value
            elif name == "plots":
                top["plots"] = _bool(key, value)
            else:
                raise ConfigError(f"{key}: unknown key")
        elif section == "run":
            if name == "seed":
                top["seed"] = _int(key, value)
            elif name == "deterministic":
                top["deterministic"] = _bool(key, value)
            elif name == "threads":
                top["threads"] = _int(key, value)
            else:
                raise ConfigError(f"{key}: unknown key")
        else:
            raise ConfigError(f"{key}: unknown key")

    from .verify import CHECK_IDS

    for cid in checks:
        if cid not in CHECK_IDS:
            raise ConfigError(f"checks.ids: unknown check {cid!r}")
    if top.get("regime") not in (None, "i", "ii"):
        raise ConfigError(f"checks.regime: expected i or ii, got {top['regime']!r}")
    if "path" in init and not os.path.isabs(init["path"]):
        init["path"] = os.path.join(base_dir, init["path"])
    if "path" in init and not os.path.exists(init["path"]):
        raise ConfigError(f"initial.path: file not found: {init['path']}")
    if top.get("threads", 1) < 1:
        raise ConfigError("run.threads: must be >= 1")
    if "seed" in top and "seed" not in bg:
        bg["seed"] = top["seed"]
    try:
        spec = BackgroundSpec(**bg)
    except TypeError as exc:
        raise ConfigError(f"background: {exc}") from None
    flow.setdefault("deterministic", top.get("deterministic", True))
    return RunConfig(background=spec, initial=InitialSpec(**init), flow=FlowConfig(**flow),
                     checks=tuple(checks), tolerances=tols, **top)


def load(path: str) -> RunConfig:
    """Read and validate a configuration file."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return from_mapping(parse_text(text), os.path.dirname(os.path.abspath(path)))
