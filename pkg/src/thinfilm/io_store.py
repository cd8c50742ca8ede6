"""Binary snapshots, CSV diagnostics tables and key=value experiment configs.

Snapshot layout (little-endian)::

    offset  size  field
    0       4     magic b"TFLM"
    4       4     format version (u32) = 1
    8       4     nx (u32)
    12      4     ny (u32)
    16      8     h (f64)
    24      8     t (f64)
    32      8     n_exponent (f64)
    40      8*nx*ny  values, row-major (y outer, x inner)
"""
from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .errors import (
    BadMagic, ConstraintViolation, IoFailure, SchemaMismatch, SnapshotError, TruncatedPayload,
    UnknownKey, VersionUnsupported,
)
from .grid import Field, Grid
from .solver import EXPLICIT, SEMI_IMPLICIT, REGIME_LOWER, REGIME_UPPER, in_regime

MAGIC = b"TFLM"
FORMAT_VERSION = 1
HEADER = struct.Struct("<4sIIIddd")


# -- snapshots ---------------------------------------------------------------------

@dataclass(frozen=True)
class Snapshot:
    field: Field
    n_exponent: float
    version: int = FORMAT_VERSION


def encode_snapshot(f: Field, n_exponent: float = float("nan")) -> bytes:
    g = f.grid
    head = HEADER.pack(MAGIC, FORMAT_VERSION, g.nx, g.ny, g.h, f.time, n_exponent)
    return head + np.ascontiguousarray(f.values, dtype="<f8").tobytes()


def decode_snapshot(data: bytes) -> Snapshot:
    if len(data) < 4 or data[:4] != MAGIC:
        raise BadMagic(f"bad magic {data[:4]!r}, expected {MAGIC!r}")
    if len(data) < HEADER.size:
        raise TruncatedPayload(HEADER.size, len(data))
    magic, version, nx, ny, h, t, n = HEADER.unpack_from(data)
    if version != FORMAT_VERSION:
        raise VersionUnsupported(f"format version {version} not supported (expected {FORMAT_VERSION})")
    expected = nx * ny * 8
    actual = len(data) - HEADER.size
    if actual < expected:
        raise TruncatedPayload(expected, actual)
    if actual > expected:
        raise SnapshotError(f"{actual - expected} trailing bytes after the payload")
    vals = np.frombuffer(data, dtype="<f8", count=nx * ny, offset=HEADER.size)
    try:
        grid = Grid(nx, ny, h)
        f = Field(grid, vals.astype(np.float64).reshape(ny, nx), t)
    except ValueError as exc:
        raise SnapshotError(f"invalid snapshot contents: {exc}") from exc
    return Snapshot(f, n, version)


def write_snapshot(f: Field, path, n_exponent: float = float("nan")) -> None:
    try:
        with open(path, "wb") as fh:
            fh.write(encode_snapshot(f, n_exponent))
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def load_snapshot(path) -> Snapshot:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    return decode_snapshot(data)


def read_snapshot(path) -> Field:
    return load_snapshot(path).field


def snapshot_name(index: int) -> str:
    return f"snap_{index:06d}.tflm"


# -- diagnostics table ---------------------------------------------------------------

BASE_COLUMNS = (
    "t", "mass", "energy", "dissipation", "entropy_a1", "entropy_rhs_a1",
    "bg_lhs", "bg_rhs_diss", "bg_rhs_cut", "l3_gradnorm",
)


def format_cell(v) -> str:
    if isinstance(v, str):
        return v
    return "%.17g" % float(v)


def diagnostics_header(levels: int) -> List[str]:
    return list(BASE_COLUMNS) + [f"class_r{k}" for k in range(levels)] + [f"excess_r{k}" for k in range(levels)]


@dataclass
class DiagnosticsTable:
    """Append-only CSV with a fixed header; one row per snapshot."""

    path: str
    levels: int
    columns: List[str] = field(default_factory=list)

    def __post_init__(self):
        self.columns = diagnostics_header(self.levels)

    @classmethod
    def create(cls, path, levels: int) -> "DiagnosticsTable":
        table = cls(str(path), levels)
        try:
            with open(table.path, "w", newline="") as fh:
                fh.write(",".join(table.columns) + "\n")
        except OSError as exc:
            raise IoFailure(f"cannot write {path}: {exc}") from exc
        return table

    def format_row(self, row: Dict[str, object]) -> str:
        if set(row) != set(self.columns):
            missing = [c for c in self.columns if c not in row]
            extra = sorted(set(row) - set(self.columns))
            raise SchemaMismatch(f"row does not match header (missing {missing}, extra {extra})")
        return ",".join(format_cell(row[c]) for c in self.columns)


def append_diagnostics_row(table: DiagnosticsTable, row: Dict[str, object]) -> None:
    line = table.format_row(row)
    try:
        with open(table.path, "a", newline="") as fh:
            fh.write(line + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot append to {table.path}: {exc}") from exc


def read_csv(path) -> Tuple[List[str], List[List[str]]]:
    try:
        with open(path, newline="") as fh:
            rows = [row for row in csv.reader(fh) if row]
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise SchemaMismatch(f"{path} is empty")
    return rows[0], rows[1:]


# -- experiment config -------------------------------------------------------------

INITS = ("constant", "mode", "droplet", "random", "travelwave1d")
SCHEMES = (EXPLICIT, SEMI_IMPLICIT)


@dataclass(frozen=True)
class ExperimentConfig:
    nx: int = 128
    domain_size: float = 1.0
    n_exponent: float = 2.0
    dt_safety: float = 0.1
    t_end: float = 1e-6
    snapshot_every: float = 1e-7
    scheme: str = EXPLICIT
    init: str = "droplet"
    init_amplitude: Optional[float] = None
    init_center: Optional[Tuple[float, ...]] = None
    init_width: Optional[float] = None
    seed: int = 0
    eps_floor: float = 1e-10
    sweep_r_min: Optional[float] = None
    sweep_r_max: Optional[float] = None
    sweep_lambda: float = 2.0
    strict_regime: bool = False
    initial_p: Optional[float] = None

    @property
    def grid(self) -> Grid:
        if self.init == "travelwave1d":
            return Grid.line(self.nx, self.domain_size)
        return Grid.square(self.nx, self.domain_size)


_KEYMAP = {
    "nx": "nx", "domain_size": "domain_size", "n_exponent": "n_exponent", "dt_safety": "dt_safety",
    "t_end": "t_end", "snapshot_every": "snapshot_every", "scheme": "scheme", "init": "init",
    "init.amplitude": "init_amplitude", "init.center": "init_center", "init.width": "init_width",
    "seed": "seed", "eps_floor": "eps_floor", "sweep.r_min": "sweep_r_min",
    "sweep.r_max": "sweep_r_max", "sweep.lambda": "sweep_lambda",
    "strict_regime": "strict_regime", "initial_p": "initial_p",
}
CONFIG_KEYS = tuple(_KEYMAP)


def _float(key, text):
    try:
        v = float(text)
    except ValueError:
        raise ConstraintViolation(key, f"expected a number, got {text!r}") from None
    if not math.isfinite(v):
        raise ConstraintViolation(key, f"must be finite, got {text!r}")
    return v


def _int(key, text):
    try:
        return int(text)
    except ValueError:
        raise ConstraintViolation(key, f"expected an integer, got {text!r}") from None


def _bool(key, text):
    t = text.strip().lower()
    if t in ("true", "1", "yes"):
        return True
    if t in ("false", "0", "no"):
        return False
    raise ConstraintViolation(key, f"expected true or false, got {text!r}")


def _point(key, text):
    parts = [p for p in text.split(",") if p.strip()]
    if len(parts) not in (1, 2):
        raise ConstraintViolation(key, f"expected 'x' or 'x,y', got {text!r}")
    return tuple(_float(key, p) for p in parts)


def parse_config(text: str) -> ExperimentConfig:
    """Parse ``key=value`` lines; ``#`` starts a comment."""
    raw: Dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConstraintViolation(f"line {lineno}", f"expected key=value, got {line!r}")
        k, v = (s.strip() for s in line.split("=", 1))
        if k not in _KEYMAP:
            raise UnknownKey(k)
        raw[k] = v

    vals: Dict[str, object] = {}
    conv = {
        "nx": _int, "seed": _int, "strict_regime": _bool, "init.center": _point,
        "scheme": lambda k, v: v, "init": lambda k, v: v,
    }
    for k, v in raw.items():
        vals[_KEYMAP[k]] = conv.get(k, _float)(k, v)
    cfg = ExperimentConfig(**vals)
    validate_config(cfg)
    return cfg


def validate_config(cfg: ExperimentConfig) -> None:
    def need(ok, key, constraint):
        if not ok:
            raise ConstraintViolation(key, constraint)

    need(cfg.nx >= 8, "nx", f"must be >= 8, got {cfg.nx}")
    need(cfg.domain_size > 0, "domain_size", "must be > 0")
    need(cfg.n_exponent > 0, "n_exponent", "must be > 0")
    if cfg.strict_regime:
        need(in_regime(cfg.n_exponent), "n_exponent",
             f"{cfg.n_exponent:g} outside the open range ({REGIME_LOWER:.5f}..., {REGIME_UPPER:g}) "
             "required by strict_regime=true")
    need(cfg.dt_safety > 0, "dt_safety", "must be > 0")
    need(cfg.t_end > 0, "t_end", "must be > 0")
    need(0 < cfg.snapshot_every <= cfg.t_end, "snapshot_every", "must satisfy 0 < snapshot_every <= t_end")
    need(cfg.scheme in SCHEMES, "scheme", f"must be one of {', '.join(SCHEMES)}")
    need(cfg.init in INITS, "init", f"must be one of {', '.join(INITS)}")
    need(cfg.init_width is None or cfg.init_width > 0, "init.width", "must be > 0")
    need(cfg.init_amplitude is None or cfg.init_amplitude >= 0, "init.amplitude", "must be >= 0")
    need(cfg.seed >= 0, "seed", "must be >= 0")
    need(cfg.eps_floor >= 0, "eps_floor", "must be >= 0")
    need(cfg.initial_p is None or cfg.initial_p > 2, "initial_p", "must be > 2")
    g = cfg.grid
    if cfg.sweep_r_min is not None:
        need(cfg.sweep_r_min >= 8 * g.h * (1 - 1e-12), "sweep.r_min", f"must be >= 8h = {8 * g.h:g}")
    if cfg.sweep_r_max is not None:
        need(cfg.sweep_r_max <= g.length / 4 * (1 + 1e-12), "sweep.r_max", f"must be <= L/4 = {g.length / 4:g}")
    if cfg.sweep_r_min is not None and cfg.sweep_r_max is not None:
        need(cfg.sweep_r_max > cfg.sweep_r_min, "sweep.r_max", "must exceed sweep.r_min")
    need(cfg.sweep_lambda > 1, "sweep.lambda", "must be > 1")


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError:
        raise ConstraintViolation(str(path), "config must be UTF-8 text") from None
    return parse_config(text)


def dump_config(cfg: ExperimentConfig) -> str:
    """Inverse of :func:`parse_config` for the keys that are set."""
    out = []
    for key, attr in _KEYMAP.items():
        v = getattr(cfg, attr)
        if v is None:
            continue
        if isinstance(v, bool):
            v = "true" if v else "false"
        elif isinstance(v, tuple):
            v = ",".join(repr(float(c)) for c in v)
        elif isinstance(v, float):
            v = repr(v)
        out.append(f"{key}={v}")
    return "\n".join(out) + "\n"
