"""Sectioned ``key = value`` run configuration.

Grammar (INI style, ``#`` or ``;`` comments, keys case-insensitive)::

    [problem]
    times     = 0, 0.5, 1          # strictly increasing, at least two
    epsilon   = 0.1
    cost_mode = exact              # or paper-normalized

    [grid]
    x_min = -1
    x_max = 2
    n_x   = 48
    v_min = -6
    v_max = 6
    n_v   = 48

    [marginals]
    files = rho0.csv, rho1.csv, rho2.csv   # one per time, relative to this file

    [solver]                       # optional, defaults shown
    tolerance      = 1e-8
    max_sweeps     = 5000
    representation = scaling       # or dense
    order          = cyclic        # symmetric and random are experimental
    trace          = false
    seed           = 0

    [output]                       # optional
    directory    = out             # relative to this file; --out overrides
    dump_kernels = false

    [sweep]                        # optional, used by sweep-epsilon
    probe_times = 0.25, 0.75       # default: quarter points of every interval

    [spline]                       # used by oracle-spline only
    knots   = knots.csv            # header t,x
    samples = 101

Syntax problems raise :class:`ParseError` with a line number; semantic ones
raise :class:`ValidationError` naming the offending field.
"""

from __future__ import annotations

import configparser
import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import MeasureError, ParseError, ValidationError
from .phasegrid import PhaseGrid, read_marginal_csv
from .problem import ProblemSpec

SCHEMA = {
    "problem": {"times", "epsilon", "cost_mode"},
    "grid": {"x_min", "x_max", "n_x", "v_min", "v_max", "n_v"},
    "marginals": {"files"},
    "solver": {"tolerance", "max_sweeps", "representation", "order", "trace", "seed"},
    "output": {"directory", "dump_kernels"},
    "sweep": {"probe_times"},
    "spline": {"knots", "samples"},
}
_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def read_config(path) -> tuple[configparser.ConfigParser, Path]:
    """Parse the file and check section and key names against :data:`SCHEMA`."""
    path = Path(path)
    cp = configparser.ConfigParser(
        inline_comment_prefixes=("#", ";"), interpolation=None, strict=True
    )
    try:
        text = path.read_text()
    except OSError as exc:
        raise ValidationError("config", f"{path}: {exc.strerror or exc}") from None
    try:
        cp.read_string(text, source=str(path))
    except configparser.MissingSectionHeaderError as exc:
        raise ParseError("expected a [section] header", exc.lineno, str(path)) from None
    except (configparser.DuplicateSectionError, configparser.DuplicateOptionError) as exc:
        raise ParseError(exc.message.split(": ", 1)[-1], exc.lineno, str(path)) from None
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise ParseError(f"cannot parse {line.strip()!r}", lineno, str(path)) from None
    for section in cp.sections():
        if section not in SCHEMA:
            raise ValidationError(section, f"unknown section [{section}]")
        for key in cp[section]:
            if key not in SCHEMA[section]:
                raise ValidationError(f"{section}.{key}", "unknown key")
    return cp, path.resolve().parent


def _get(cp, section: str, key: str, fallback=None):
    if cp.has_option(section, key):
        value = cp.get(section, key).strip()
        if value:
            return value
    if fallback is None:
        raise ValidationError(key, f"missing [{section}] {key}")
    return fallback


def _float(cp, section, key, fallback=None) -> float:
    raw = _get(cp, section, key, fallback)
    try:
        return float(raw)
    except (TypeError, ValueError):
        raise ValidationError(key, f"not a number: {raw!r}") from None


def _int(cp, section, key, fallback=None) -> int:
    raw = _get(cp, section, key, fallback)
    try:
        return int(raw)
    except (TypeError, ValueError):
        raise ValidationError(key, f"not an integer: {raw!r}") from None


def _bool(cp, section, key, fallback="false") -> bool:
    raw = str(_get(cp, section, key, fallback)).lower()
    if raw in _TRUE:
        return True
    if raw in _FALSE:
        return False
    raise ValidationError(key, f"not a boolean: {raw!r}")


def parse_floats(raw: str, field: str) -> tuple[float, ...]:
    try:
        return tuple(float(s) for s in raw.split(",") if s.strip())
    except ValueError:
        raise ValidationError(field, f"expected comma-separated numbers, got {raw!r}") from None


def _path(base: Path, raw: str) -> Path:
    p = Path(raw).expanduser()
    return p if p.is_absolute() else base / p


def load_spec(path) -> ProblemSpec:
    """Read a config file and its marginal CSVs into a validated spec."""
    cp, base = read_config(path)
    times = parse_floats(_get(cp, "problem", "times"), "times")
    epsilon = _float(cp, "problem", "epsilon")
    cost_mode = _get(cp, "problem", "cost_mode", "exact")

    try:
        grid = PhaseGrid.uniform(
            _float(cp, "grid", "x_min"),
            _float(cp, "grid", "x_max"),
            _int(cp, "grid", "n_x"),
            _float(cp, "grid", "v_min"),
            _float(cp, "grid", "v_max"),
            _int(cp, "grid", "n_v"),
        )
    except ValidationError:
        raise
    except ValueError as exc:
        raise ValidationError("grid", str(exc)) from None

    files = [s.strip() for s in _get(cp, "marginals", "files").split(",") if s.strip()]
    if len(files) != len(times):
        raise ValidationError(
            "marginals", f"{len(times)} times but {len(files)} marginal files"
        )
    paths = [_path(base, f) for f in files]
    marginals = []
    for p in paths:
        if not p.is_file():
            raise ValidationError("marginals", f"marginal file not found: {p}")
        try:
            marginals.append(read_marginal_csv(p, grid))
        except MeasureError as exc:
            raise ValidationError("marginals", str(exc)) from None

    out_dir = None
    if cp.has_option("output", "directory"):
        out_dir = _path(base, _get(cp, "output", "directory"))
    extras = {"dump_kernels": _bool(cp, "output", "dump_kernels")}
    if cp.has_option("sweep", "probe_times"):
        extras["probe_times"] = parse_floats(_get(cp, "sweep", "probe_times"), "probe_times")

    return ProblemSpec(
        times=times,
        epsilon=epsilon,
        grid=grid,
        marginals=tuple(marginals),
        cost_mode=cost_mode,
        tolerance=_float(cp, "solver", "tolerance", "1e-8"),
        max_sweeps=_int(cp, "solver", "max_sweeps", "5000"),
        representation=_get(cp, "solver", "representation", "scaling").lower(),
        order=_get(cp, "solver", "order", "cyclic").lower(),
        trace=_bool(cp, "solver", "trace"),
        output_dir=out_dir,
        marginal_paths=tuple(paths),
        seed=_int(cp, "solver", "seed", "0"),
        extras=extras,
    )


@dataclass(frozen=True)
class SplineConfig:
    knots_path: Path
    samples: int
    output_dir: Path | None


def load_spline_config(path) -> SplineConfig:
    cp, base = read_config(path)
    knots = _path(base, _get(cp, "spline", "knots"))
    if not knots.is_file():
        raise ValidationError("knots", f"knot file not found: {knots}")
    samples = _int(cp, "spline", "samples", "101")
    if samples < 2:
        raise ValidationError("samples", "must be >= 2")
    out_dir = None
    if cp.has_option("output", "directory"):
        out_dir = _path(base, _get(cp, "output", "directory"))
    return SplineConfig(knots, samples, out_dir)


def read_knots_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Load a ``t,x`` CSV of spline knots."""
    path = Path(path)
    ts, xs = [], []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["t", "x"]:
            raise ParseError("expected header 't,x'", 1, str(path))
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise ParseError("expected 2 columns", lineno, str(path))
            try:
                ts.append(float(row[0]))
                xs.append(float(row[1]))
            except ValueError as exc:
                raise ParseError(str(exc), lineno, str(path)) from None
    return np.asarray(ts), np.asarray(xs)
