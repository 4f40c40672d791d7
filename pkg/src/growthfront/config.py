"""Run configuration: a versioned YAML document with nested blocks.

Schema (version 1), defaults in brackets::

    version: 1
    mode: solve | refine | sweep | compare          [solve]
    metric:
      kind: euclidean | hyperbolic_sinh | scaled_hyperbolic | tabulated
      kappa: float > 0                             (scaled_hyperbolic only)
      table: path to a two-column r,G CSV          (tabulated only; relative to the config file)
      tail: divergent | convergent | unknown       [unknown]
    scenario:
      lambda: float > 1
      ell: float > 0
    grid:
      r_max: float > ell                           [max(3 ell, 1.2 T) if T finite, else 3 ell]
      n_r: int >= 16                               [400]
      n_theta: int >= 16                           [720]
      stencil_order: 1 | 2 | 3                     [2]
      max_iter: int >= 1                           [node count]
      node_cap: int                                [4000000]
    outputs:
      directory: path                              [out]
      artifacts: subset of summary, profile, mask, slices, curves   [all]
      times: list of t >= 0                        [0, 0.25, 0.5, 1, 2]
    refine:
      levels: int >= 2                             [3]  (n_r, 2 n_r, 4 n_r, ...)
    sweep:
      lambdas: list of floats > 1                  [scenario.lambda]
      ells: list of floats > 0                     [scenario.ell]
      workers: int >= 1                            [1]
      max_doublings: int >= 0                      [2]

Validation collects every problem, each prefixed with the line it refers to.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import yaml

from .errors import GrowthFrontError
from .io import canonical_json, sha256_bytes, sha256_file
from .metric import KINDS, TAILS, SurfaceMetric

SCHEMA_VERSION = 1
MODES = ("solve", "refine", "sweep", "compare")
ARTIFACTS = ("summary", "profile", "mask", "slices", "curves")
DEFAULT_TIMES = (0.0, 0.25, 0.5, 1.0, 2.0)


class ConfigError(GrowthFrontError):
    def __init__(self, errors):
        super().__init__("; ".join(errors))
        self.errors = list(errors)


@dataclass(frozen=True)
class MetricBlock:
    kind: str
    kappa: Optional[float] = None
    table: Optional[str] = None
    tail: Optional[str] = None


@dataclass(frozen=True)
class GridBlock:
    r_max: Optional[float] = None
    n_r: int = 400
    n_theta: int = 720
    stencil_order: int = 2
    max_iter: Optional[int] = None
    node_cap: int = 4_000_000


@dataclass(frozen=True)
class OutputsBlock:
    directory: str = "out"
    artifacts: tuple = ARTIFACTS
    times: tuple = DEFAULT_TIMES


@dataclass(frozen=True)
class RefineBlock:
    levels: int = 3


@dataclass(frozen=True)
class SweepBlock:
    lambdas: tuple = ()
    ells: tuple = ()
    workers: int = 1
    max_doublings: int = 2


@dataclass(frozen=True)
class RunConfig:
    metric: MetricBlock
    lam: float
    ell: float
    grid: GridBlock = GridBlock()
    outputs: OutputsBlock = OutputsBlock()
    refine: RefineBlock = RefineBlock()
    sweep: SweepBlock = SweepBlock()
    mode: str = "solve"
    version: int = SCHEMA_VERSION
    base_dir: str = field(default=".", compare=False)

    def table_path(self) -> Optional[Path]:
        if self.metric.table is None:
            return None
        p = Path(self.metric.table)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def build_metric(self) -> SurfaceMetric:
        m = self.metric
        if m.kind == "tabulated":
            return SurfaceMetric.from_csv(self.table_path(), tail=m.tail)
        if m.kind == "scaled_hyperbolic":
            return SurfaceMetric.scaled_hyperbolic(m.kappa)
        return SurfaceMetric(m.kind)

    def scenario(self):
        from .analytic import Scenario

        return Scenario(self.lam, self.ell)

    def hash_payload(self) -> dict:
        """Everything that determines numerical results.

        Mode, outputs and the worker count are excluded, so a solve and a
        later compare from the same file share a hash.
        """
        metric = asdict(self.metric)
        if metric["table"] is not None:
            metric["table"] = sha256_file(self.table_path())
        return {
            "version": self.version,
            "metric": metric,
            "scenario": {"lambda": self.lam, "ell": self.ell},
            "grid": asdict(self.grid),
            "refine": asdict(self.refine),
            "sweep": {
                "lambdas": list(self.sweep.lambdas),
                "ells": list(self.sweep.ells),
                "max_doublings": self.sweep.max_doublings,
            },
        }

    def config_hash(self) -> str:
        return sha256_bytes(canonical_json(self.hash_payload()).encode())[:16]


# -- line bookkeeping --------------------------------------------------------


def _line_index(node, path=(), out=None):
    if out is None:
        out = {}
    out[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            key = k.value
            out[path + (key,)] = k.start_mark.line + 1
            _line_index(v, path + (key,), out)
            out[path + (key,)] = k.start_mark.line + 1
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            _line_index(v, path + (i,), out)
    return out


def _apply_override(data, item, overridden, errors):
    if "=" not in item:
        errors.append(f"--set {item}: expected key=value")
        return
    key, raw = item.split("=", 1)
    parts = key.strip().split(".")
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError:
        value = raw
    if isinstance(value, (dict, list)):
        errors.append(f"--set {key}: only scalar fields can be overridden")
        return
    node = data
    for p in parts[:-1]:
        if not isinstance(node.get(p), dict):
            node[p] = {}
        node = node[p]
    node[parts[-1]] = value
    overridden.add(tuple(parts))


class _Checker:
    def __init__(self, lines, overridden):
        self.lines = lines
        self.overridden = overridden
        self.errors = []

    def where(self, path):
        if path in self.overridden:
            return "--set " + ".".join(map(str, path))
        p = path
        while p not in self.lines and p:
            p = p[:-1]
        return f"line {self.lines.get(p, 1)}"

    def err(self, path, msg):
        self.errors.append(f"{self.where(path)}: {msg}")

    def block(self, data, key, required):
        val = data.get(key)
        if val is None:
            if required:
                self.err((key,), f"missing required block '{key}'")
            return None if required else {}
        if not isinstance(val, dict):
            self.err((key,), f"'{key}' must be a mapping")
            return None
        return val

    def number(self, block, path, default=None, required=False, integer=False, check=None, msg=""):
        key = path[-1]
        if block is None or key not in block or block[key] is None:
            if required:
                self.err(path, f"missing required field '{'.'.join(path)}'")
            return default
        val = block[key]
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            self.err(path, f"'{'.'.join(path)}' must be a number, got {val!r}")
            return default
        if integer and (not float(val).is_integer()):
            self.err(path, f"'{'.'.join(path)}' must be an integer")
            return default
        val = int(val) if integer else float(val)
        if not integer and not math.isfinite(val):
            self.err(path, f"'{'.'.join(path)}' must be finite")
            return default
        if check is not None and not check(val):
            self.err(path, msg)
            return default
        return val

    def number_list(self, block, path, default, check, msg):
        key = path[-1]
        if block is None or block.get(key) is None:
            return default
        val = block[key]
        if not isinstance(val, list) or not val:
            self.err(path, f"'{'.'.join(path)}' must be a nonempty list")
            return default
        out = []
        for i, v in enumerate(val):
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not check(float(v)):
                self.err(path + (i,), f"{'.'.join(path)}[{i}]: {msg}")
            else:
                out.append(float(v))
        return tuple(out)

    def choice(self, block, path, choices, default=None, required=False):
        key = path[-1]
        if block is None or block.get(key) is None:
            if required:
                self.err(path, f"missing required field '{'.'.join(path)}'")
            return default
        val = block[key]
        if val not in choices:
            self.err(path, f"'{'.'.join(path)}' must be one of {', '.join(choices)}; got {val!r}")
            return default
        return val


def validate_config(text: str, base_dir=".", overrides=(), mode: Optional[str] = None):
    """Parse and validate a config document.

    Returns ``(config, errors)``: ``config`` is None whenever ``errors`` is
    nonempty.  Never raises on malformed input.
    """
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}" if mark is not None else "line ?"
        return None, [f"{where}: YAML parse error: {getattr(exc, 'problem', exc)}"]
    if data is None:
        data = {}
    if not isinstance(data, dict):
        return None, ["line 1: config must be a mapping"]
    lines = _line_index(root) if root is not None else {}
    pre_errors = []
    overridden = set()
    for item in overrides:
        _apply_override(data, item, overridden, pre_errors)
    c = _Checker(lines, overridden)
    c.errors.extend(pre_errors)

    known = {"version", "mode", "metric", "scenario", "grid", "outputs", "refine", "sweep"}
    for key in data:
        if key not in known:
            c.err((key,), f"unknown top-level key '{key}'")

    version = data.get("version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        c.err(("version",), f"unsupported schema version {version!r} (expected {SCHEMA_VERSION})")
    if mode is None:
        mode = c.choice(data, ("mode",), MODES, default="solve")
    elif mode not in MODES:
        c.errors.append(f"mode must be one of {', '.join(MODES)}; got {mode!r}")

    mb = c.block(data, "metric", required=True)
    kind = c.choice(mb, ("metric", "kind"), KINDS, required=True) if mb is not None else None
    kappa = table = tail = None
    if mb is not None:
        tail = c.choice(mb, ("metric", "tail"), TAILS)
        if kind == "scaled_hyperbolic":
            kappa = c.number(mb, ("metric", "kappa"), required=True, check=lambda v: v > 0, msg="kappa must be positive")
        elif mb.get("kappa") is not None:
            c.err(("metric", "kappa"), "kappa is only meaningful for scaled_hyperbolic")
        if kind == "tabulated":
            table = mb.get("table")
            if not isinstance(table, str):
                c.err(("metric", "table"), "tabulated metric needs 'table: <csv path>'")
                table = None
            else:
                p = Path(table) if Path(table).is_absolute() else Path(base_dir) / table
                if not p.is_file():
                    c.err(("metric", "table"), f"table file not found: {p}")
                else:
                    try:
                        SurfaceMetric.from_csv(p, tail=tail)
                    except (ValueError, OSError) as exc:
                        c.err(("metric", "table"), f"unreadable table: {exc}")
        elif mb.get("table") is not None:
            c.err(("metric", "table"), "table is only meaningful for tabulated metrics")

    sb = c.block(data, "scenario", required=True)
    lam = c.number(sb, ("scenario", "lambda"), required=True, check=lambda v: v > 1, msg="lambda must exceed 1")
    ell = c.number(sb, ("scenario", "ell"), required=True, check=lambda v: v > 0, msg="ell must be positive")

    gb = c.block(data, "grid", required=False)
    g = GridBlock()
    grid = GridBlock(
        r_max=c.number(gb, ("grid", "r_max"), check=lambda v: ell is None or v > ell, msg="r_max must exceed ell"),
        n_r=c.number(gb, ("grid", "n_r"), g.n_r, integer=True, check=lambda v: v >= 16, msg="n_r must be at least 16"),
        n_theta=c.number(gb, ("grid", "n_theta"), g.n_theta, integer=True, check=lambda v: v >= 16, msg="n_theta must be at least 16"),
        stencil_order=c.number(gb, ("grid", "stencil_order"), g.stencil_order, integer=True, check=lambda v: v in (1, 2, 3), msg="stencil_order must be 1, 2 or 3"),
        max_iter=c.number(gb, ("grid", "max_iter"), None, integer=True, check=lambda v: v >= 1, msg="max_iter must be >= 1"),
        node_cap=c.number(gb, ("grid", "node_cap"), g.node_cap, integer=True, check=lambda v: v >= 1, msg="node_cap must be positive"),
    )

    ob = c.block(data, "outputs", required=False)
    outputs = OutputsBlock()
    if ob is not None:
        directory = ob.get("directory", outputs.directory)
        if not isinstance(directory, str):
            c.err(("outputs", "directory"), "directory must be a string")
            directory = outputs.directory
        arts = ob.get("artifacts", list(ARTIFACTS))
        if not isinstance(arts, list) or any(a not in ARTIFACTS for a in arts):
            c.err(("outputs", "artifacts"), f"artifacts must be a list drawn from {', '.join(ARTIFACTS)}")
            arts = list(ARTIFACTS)
        times = c.number_list(ob, ("outputs", "times"), DEFAULT_TIMES, lambda v: v >= 0 and math.isfinite(v), "times must be finite and >= 0")
        outputs = OutputsBlock(directory, tuple(arts), times)

    rb = c.block(data, "refine", required=False)
    refine = RefineBlock(c.number(rb, ("refine", "levels"), 3, integer=True, check=lambda v: v >= 2, msg="levels must be >= 2"))

    wb = c.block(data, "sweep", required=False)
    sweep = SweepBlock(
        lambdas=c.number_list(wb, ("sweep", "lambdas"), (lam,) if lam else (), lambda v: v > 1, "lambda must exceed 1"),
        ells=c.number_list(wb, ("sweep", "ells"), (ell,) if ell else (), lambda v: v > 0, "ell must be positive"),
        workers=c.number(wb, ("sweep", "workers"), 1, integer=True, check=lambda v: v >= 1, msg="workers must be >= 1"),
        max_doublings=c.number(wb, ("sweep", "max_doublings"), 2, integer=True, check=lambda v: v >= 0, msg="max_doublings must be >= 0"),
    )

    if c.errors:
        return None, c.errors
    cfg = RunConfig(
        metric=MetricBlock(kind, kappa, table, tail),
        lam=lam,
        ell=ell,
        grid=grid,
        outputs=outputs,
        refine=refine,
        sweep=sweep,
        mode=mode,
        version=SCHEMA_VERSION,
        base_dir=str(base_dir),
    )
    return cfg, []


def load_config(path, overrides=(), mode=None) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc}"]) from exc
    cfg, errors = validate_config(text, base_dir=path.parent, overrides=overrides, mode=mode)
    if errors:
        raise ConfigError(errors)
    return cfg
