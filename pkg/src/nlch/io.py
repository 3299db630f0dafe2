"""Run configuration, field snapshots and time-series CSV files.

Configuration files are line oriented::

    scenario = spinodal2d        # keys before any section are top level
    [model]
    theta = 1.0
    a_coeffs = 1.0, 0.0, 0.5

Unknown sections or keys are rejected with the offending line number.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .diagnostics import COLUMNS
from .errors import FormatError, InvalidSpec, IoError, ParseError, ValidationError
from .grid import Grid
from .model import ModelParams, validate_coefficient
from .stepper import StepConfig

__all__ = [
    "ModelBlock",
    "GridBlock",
    "InitialBlock",
    "SteppingBlock",
    "OutputBlock",
    "ExperimentBlock",
    "RunSpec",
    "parse_config",
    "format_config",
    "write_snapshot",
    "read_snapshot",
    "CsvSeriesWriter",
    "read_series",
    "SNAPSHOT_MAGIC",
    "CSV_SCHEMA",
]

SNAPSHOT_MAGIC = b"NLCH1\n"
CSV_SCHEMA = "# nlch-series v1"


@dataclass(frozen=True)
class ModelBlock:
    theta: float = 1.0
    theta0: float = 2.0
    a_kind: str = "constant"
    a_coeffs: tuple = (1.0,)
    b_kind: str = "constant"
    b_coeffs: tuple = (1.0,)
    clamp_delta: float = 1e-9

    def build(self):
        return ModelParams(
            theta=self.theta,
            theta0=self.theta0,
            coeff_a=validate_coefficient(self.a_kind, self.a_coeffs),
            coeff_b=validate_coefficient(self.b_kind, self.b_coeffs),
            clamp_delta=self.clamp_delta,
        )


@dataclass(frozen=True)
class GridBlock:
    dim: int = 1
    nx: int = 64
    ny: int = 1
    Lx: float = 1.0
    Ly: float = 1.0

    def build(self):
        return Grid(self.dim, self.nx, self.ny, self.Lx, self.Ly)


@dataclass(frozen=True)
class InitialBlock:
    kind: str = "constant_noise"
    m: float = 0.0
    amplitude: float = 0.0
    seed: int = None
    modes: tuple = (1, 0)
    width: float = 0.5
    path: str = ""


@dataclass(frozen=True)
class SteppingBlock:
    dt_init: float = 1e-3
    dt_min: float = 1e-10
    dt_max: float = 1e-1
    newton_tol: float = 1e-10
    newton_max_iter: int = 50
    energy_slack: float = 1e-10
    shrink: float = 0.5
    grow: float = 1.2
    barrier_margin: float = 1e-8
    equilibrium_tol: float = 1e-8
    t_end: float = 1.0

    def build(self):
        kw = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "t_end"}
        return StepConfig(**kw)


@dataclass(frozen=True)
class OutputBlock:
    csv_path: str = "series.csv"
    snapshot_dir: str = "snapshots"
    snapshot_every: int = 0


@dataclass(frozen=True)
class ExperimentBlock:
    """Knobs used by the experiment presets; plain simulations ignore them."""

    eta: float = 1e-3
    epsilon: float = 0.1
    offset: float = 1e-3
    samples: int = 10
    steady_tol: float = 1e-10
    fit_ls: bool = False


@dataclass(frozen=True)
class RunSpec:
    scenario: str = "custom"
    model: ModelBlock = field(default_factory=ModelBlock)
    grid: GridBlock = field(default_factory=GridBlock)
    initial: InitialBlock = field(default_factory=InitialBlock)
    stepping: SteppingBlock = field(default_factory=SteppingBlock)
    output: OutputBlock = field(default_factory=OutputBlock)
    experiment: ExperimentBlock = field(default_factory=ExperimentBlock)

    def with_output(self, directory):
        d = Path(directory)
        out = replace(self.output, csv_path=str(d / "series.csv"),
                      snapshot_dir=str(d / "snapshots"))
        return replace(self, output=out)


_SECTIONS = {
    "model": ModelBlock,
    "grid": GridBlock,
    "initial": InitialBlock,
    "stepping": SteppingBlock,
    "output": OutputBlock,
    "experiment": ExperimentBlock,
}
_INITIAL_KINDS = ("constant_noise", "cosine_mode", "tanh_profile", "from_snapshot")
_TUPLE_FLOAT = {"a_coeffs", "b_coeffs"}
_TUPLE_INT = {"modes"}
_LINE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*?)\s*$")


def _convert(cls, key, raw, lineno):
    ftype = {f.name: f.type for f in fields(cls)}[key]
    try:
        if key in _TUPLE_FLOAT:
            return tuple(float(v) for v in raw.split(",") if v.strip())
        if key in _TUPLE_INT:
            return tuple(int(v) for v in raw.split(",") if v.strip())
        if ftype == "bool":
            if raw.lower() not in ("true", "false", "yes", "no", "1", "0"):
                raise ValueError(raw)
            return raw.lower() in ("true", "yes", "1")
        if ftype == "int":
            return int(raw)
        if ftype == "float":
            return float(raw)
        return raw
    except ValueError:
        raise ParseError(f"bad value {raw!r} for {key}", lineno) from None


def parse_config(text):
    """Parse and validate a run configuration.

    Raises
    ------
    ParseError
        Syntax errors, unknown sections and unknown keys (with line number).
    ValidationError
        Values that break a model, grid or stepping invariant.
    """
    values = {name: {} for name in _SECTIONS}
    top = {}
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ParseError(f"malformed section header {line!r}", lineno)
            section = line[1:-1].strip()
            if section not in _SECTIONS:
                raise ParseError(f"unknown section [{section}]", lineno)
            continue
        match = _LINE.match(line)
        if not match:
            raise ParseError(f"expected 'key = value', got {line!r}", lineno)
        key, raw = match.groups()
        if section is None:
            if key != "scenario":
                raise ParseError(f"unknown top-level key {key!r}", lineno)
            top[key] = raw
            continue
        cls = _SECTIONS[section]
        if key not in {f.name for f in fields(cls)}:
            raise ParseError(f"unknown key {key!r} in [{section}]", lineno)
        if key in values[section]:
            raise ParseError(f"duplicate key {key!r}", lineno)
        values[section][key] = _convert(cls, key, raw, lineno)

    blocks = {name: cls(**values[name]) for name, cls in _SECTIONS.items()}
    spec = RunSpec(scenario=top.get("scenario", "custom"), **blocks)
    validate_spec(spec)
    return spec


def validate_spec(spec):
    """Check every block against the owning module's invariants."""
    if spec.model.theta >= spec.model.theta0:
        raise ValidationError("theta < theta0 required")
    spec.model.build()
    spec.grid.build()
    try:
        spec.stepping.build()
    except InvalidSpec as exc:
        raise ValidationError(f"stepping: {exc}") from None
    if not spec.stepping.t_end > 0:
        raise ValidationError("stepping.t_end must be positive")
    ini = spec.initial
    if ini.kind not in _INITIAL_KINDS:
        raise ValidationError(f"initial.kind must be one of {', '.join(_INITIAL_KINDS)}")
    if ini.kind != "from_snapshot" and not -1.0 < ini.m < 1.0:
        raise ValidationError("initial.m must lie in (-1, 1)")
    if ini.kind == "constant_noise" and ini.amplitude != 0 and ini.seed is None:
        raise ValidationError("initial.seed is required when noise is used")
    if ini.kind == "from_snapshot" and not ini.path:
        raise ValidationError("initial.path is required for from_snapshot")
    if ini.kind == "cosine_mode" and len(ini.modes) != 2:
        raise ValidationError("initial.modes takes two integers")
    if spec.output.snapshot_every < 0:
        raise ValidationError("output.snapshot_every must be >= 0")


def _fmt(v):
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else str(v)


def format_config(spec):
    """Render a :class:`RunSpec` in the text format :func:`parse_config` reads."""
    lines = [f"scenario = {spec.scenario}"]
    for name in _SECTIONS:
        block = getattr(spec, name)
        lines.append("")
        lines.append(f"[{name}]")
        for f in fields(block):
            v = getattr(block, f.name)
            if v is None or v == "":
                continue
            lines.append(f"{f.name} = {_fmt(v)}")
    return "\n".join(lines) + "\n"


# -- snapshots -----------------------------------------------------------------

def write_snapshot(path, grid, field_values, t, m):
    """Write a field with an ASCII header and a little-endian float64 payload."""
    values = grid.check(field_values)
    header = (
        f"dim={grid.dim}\nnx={grid.nx}\nny={grid.ny}\n"
        f"Lx={grid.Lx!r}\nLy={grid.Ly!r}\nt={float(t)!r}\nm={float(m)!r}\n\n"
    )
    try:
        with open(path, "wb") as fh:
            fh.write(SNAPSHOT_MAGIC)
            fh.write(header.encode("ascii"))
            fh.write(np.ascontiguousarray(values, dtype="<f8").tobytes())
    except OSError as exc:
        raise IoError(f"cannot write snapshot {path}: {exc}") from exc


def read_snapshot(path):
    """Return ``(grid, values, t, m)`` from a snapshot file."""
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read snapshot {path}: {exc}") from exc
    if not data.startswith(SNAPSHOT_MAGIC):
        raise FormatError(f"{path}: bad magic")
    end = data.find(b"\n\n", len(SNAPSHOT_MAGIC) - 1)
    if end < 0:
        raise FormatError(f"{path}: unterminated header")
    meta = {}
    for line in data[len(SNAPSHOT_MAGIC):end].decode("ascii").splitlines():
        key, sep, val = line.partition("=")
        if not sep:
            raise FormatError(f"{path}: malformed header line {line!r}")
        meta[key] = val
    try:
        grid = Grid(int(meta["dim"]), int(meta["nx"]), int(meta["ny"]),
                    float(meta["Lx"]), float(meta["Ly"]))
        t, m = float(meta["t"]), float(meta["m"])
    except (KeyError, ValueError, ValidationError) as exc:
        raise FormatError(f"{path}: bad header ({exc})") from None
    payload = data[end + 2:]
    if len(payload) != 8 * grid.size:
        raise FormatError(
            f"{path}: payload has {len(payload)} bytes, expected {8 * grid.size}"
        )
    values = np.frombuffer(payload, dtype="<f8").astype(float).reshape(grid.shape)
    return grid, values, t, m


# -- CSV time series -----------------------------------------------------------

class CsvSeriesWriter:
    """Streaming writer for :class:`~nlch.diagnostics.TimeSeriesRecord` rows."""

    def __init__(self, path):
        self.path = Path(path)
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._fh = open(self.path, "w", newline="")
        except OSError as exc:
            raise IoError(f"cannot open {path}: {exc}") from exc
        self._fh.write(CSV_SCHEMA + "\n")
        self._writer = csv.writer(self._fh, lineterminator="\n")
        self._writer.writerow(COLUMNS)

    def __call__(self, record):
        self._writer.writerow([repr(v) if isinstance(v, float) else v
                               for v in record.as_row()])

    def close(self):
        self._fh.flush()
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_series(path):
    """Read a series CSV into a dict of numpy columns."""
    try:
        with open(path, newline="") as fh:
            first = fh.readline().rstrip("\n")
            if first != CSV_SCHEMA:
                raise FormatError(f"{path}: missing schema line {CSV_SCHEMA!r}")
            reader = csv.reader(fh)
            header = next(reader, None)
            if tuple(header or ()) != COLUMNS:
                raise FormatError(f"{path}: unexpected columns {header}")
            rows = [list(map(float, row)) for row in reader if row]
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None
    arr = np.array(rows, dtype=float).reshape(-1, len(COLUMNS))
    return {name: arr[:, i] for i, name in enumerate(COLUMNS)}
