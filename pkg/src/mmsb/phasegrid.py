"""Phase-space grid and the probability measures that live on it.

States are indexed row-major, ``s = ix * n_v + iv``, everywhere in the package.
Measures carry point masses at nodes, not densities; divide by ``dx * dv`` to
get a density for display.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import GridError, MeasureError, SampleOutOfRange

MASS_TOL = 1e-12
SPACING_TOL = 1e-12
# marginal files within this of unit mass are renormalized silently
FILE_MASS_TOL = 1e-6


def _frozen(a, dtype=float) -> np.ndarray:
    out = np.array(a, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


def _spacing(nodes: np.ndarray, name: str) -> float:
    if nodes.ndim != 1 or nodes.size < 1:
        raise GridError(f"{name} must be a non-empty 1-D array")
    if not np.all(np.isfinite(nodes)):
        raise GridError(f"{name} must be finite")
    if nodes.size == 1:
        return 1.0
    steps = np.diff(nodes)
    if np.any(steps <= 0):
        raise GridError(f"{name} must be strictly increasing")
    h = (nodes[-1] - nodes[0]) / (nodes.size - 1)
    if np.max(np.abs(steps - h)) > SPACING_TOL * max(h, np.max(np.abs(nodes))):
        raise GridError(f"{name} must be uniformly spaced")
    return float(h)


@dataclass(frozen=True, eq=False)
class PhaseGrid:
    """Tensor grid of positions ``x_nodes`` and velocities ``v_nodes``.

    A single-node axis is allowed (``n_v = 1`` gives a position-only model);
    its spacing is taken as 1 so cell areas stay well defined.
    """

    x_nodes: np.ndarray
    v_nodes: np.ndarray
    dx: float = field(init=False)
    dv: float = field(init=False)

    def __post_init__(self):
        x = _frozen(self.x_nodes)
        v = _frozen(self.v_nodes)
        object.__setattr__(self, "x_nodes", x)
        object.__setattr__(self, "v_nodes", v)
        object.__setattr__(self, "dx", _spacing(x, "x_nodes"))
        object.__setattr__(self, "dv", _spacing(v, "v_nodes"))

    @classmethod
    def uniform(cls, x_min, x_max, n_x, v_min, v_max, n_v) -> "PhaseGrid":
        if n_x < 1 or n_v < 1:
            raise GridError("n_x and n_v must be >= 1")
        if (n_x > 1 and not x_max > x_min) or (n_v > 1 and not v_max > v_min):
            raise GridError("grid bounds must satisfy min < max")
        return cls(np.linspace(x_min, x_max, n_x), np.linspace(v_min, v_max, n_v))

    @property
    def n_x(self) -> int:
        return self.x_nodes.size

    @property
    def n_v(self) -> int:
        return self.v_nodes.size

    @property
    def n_states(self) -> int:
        return self.n_x * self.n_v

    @property
    def cell_area(self) -> float:
        return self.dx * self.dv

    @property
    def X(self) -> np.ndarray:
        """Position coordinate of every state, length ``n_states``."""
        return np.repeat(self.x_nodes, self.n_v)

    @property
    def V(self) -> np.ndarray:
        return np.tile(self.v_nodes, self.n_x)

    @property
    def states(self) -> np.ndarray:
        """``(n_states, 2)`` array of ``(x, v)`` pairs."""
        return np.column_stack([self.X, self.V])

    def index(self, ix: int, iv: int) -> int:
        return ix * self.n_v + iv

    def is_v_symmetric(self, tol: float = 1e-12) -> bool:
        v = self.v_nodes
        return bool(np.max(np.abs(v + v[::-1])) <= tol * max(1.0, np.max(np.abs(v))))

    def velocity_flip(self) -> np.ndarray:
        """Permutation of states sending ``(x, v)`` to ``(x, -v)``.

        Raises GridError unless the velocity nodes are symmetric about zero.
        """
        if not self.is_v_symmetric():
            raise GridError("velocity nodes are not symmetric about 0")
        ix, iv = np.divmod(np.arange(self.n_states), self.n_v)
        return ix * self.n_v + (self.n_v - 1 - iv)

    def same_as(self, other: "PhaseGrid") -> bool:
        return (
            self is other
            or (
                self.n_x == other.n_x
                and self.n_v == other.n_v
                and np.array_equal(self.x_nodes, other.x_nodes)
                and np.array_equal(self.v_nodes, other.v_nodes)
            )
        )


def _check_weights(w: np.ndarray, n: int, what: str) -> None:
    if w.shape != (n,):
        raise MeasureError(f"{what} weights must have length {n}, got shape {w.shape}")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise MeasureError(f"{what} weights must be finite and nonnegative")
    total = float(np.sum(w))
    if abs(total - 1.0) > MASS_TOL:
        raise MeasureError(f"{what} weights sum to {total!r}, expected 1")


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Probability masses on the states of a :class:`PhaseGrid`."""

    grid: PhaseGrid
    weights: np.ndarray

    def __post_init__(self):
        w = _frozen(self.weights)
        _check_weights(w, self.grid.n_states, "DiscreteMeasure")
        object.__setattr__(self, "weights", w)

    @classmethod
    def normalized(cls, grid: PhaseGrid, masses) -> "DiscreteMeasure":
        m = np.asarray(masses, dtype=float)
        total = m.sum()
        if not total > 0:
            raise MeasureError("cannot normalize a measure with zero total mass")
        return cls(grid, m / total)

    def table(self) -> np.ndarray:
        """Masses as an ``(n_x, n_v)`` array."""
        return self.weights.reshape(self.grid.n_x, self.grid.n_v)

    def density(self) -> np.ndarray:
        return self.table() / self.grid.cell_area


@dataclass(frozen=True, eq=False)
class PositionalMarginal:
    """Probability masses on position nodes only."""

    x_nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        x = _frozen(self.x_nodes)
        w = _frozen(self.weights)
        _check_weights(w, x.size, "PositionalMarginal")
        object.__setattr__(self, "x_nodes", x)
        object.__setattr__(self, "weights", w)

    @classmethod
    def normalized(cls, x_nodes, masses) -> "PositionalMarginal":
        m = np.asarray(masses, dtype=float)
        total = m.sum()
        if not total > 0:
            raise MeasureError("cannot normalize a marginal with zero total mass")
        return cls(x_nodes, m / total)

    def matches(self, grid: PhaseGrid, rtol: float = 1e-9) -> bool:
        if self.x_nodes.size != grid.n_x:
            return False
        scale = max(grid.dx, 1.0)
        return bool(np.max(np.abs(self.x_nodes - grid.x_nodes)) <= rtol * scale)

    def mean_var(self) -> tuple[float, float]:
        m = float(self.weights @ self.x_nodes)
        return m, float(self.weights @ (self.x_nodes - m) ** 2)


class Moments(NamedTuple):
    mean_x: float
    mean_v: float
    var_x: float
    var_v: float


def project_x(mu: DiscreteMeasure) -> PositionalMarginal:
    """Sum out velocity: ``rho[ix] = sum_iv mu[ix, iv]``."""
    return PositionalMarginal(mu.grid.x_nodes, mu.table().sum(axis=1))


def moments(mu: DiscreteMeasure) -> Moments:
    w = mu.weights
    X, V = mu.grid.X, mu.grid.V
    mx = float(w @ X)
    mv = float(w @ V)
    return Moments(mx, mv, float(w @ (X - mx) ** 2), float(w @ (V - mv) ** 2))


def marginal_from_samples(xs, grid: PhaseGrid) -> PositionalMarginal:
    """Histogram position samples onto the nearest grid node."""
    xs = np.asarray(xs, dtype=float).ravel()
    if xs.size == 0:
        raise MeasureError("no samples given")
    x = grid.x_nodes
    half = 0.5 * grid.dx
    bad = (xs < x[0] - half) | (xs > x[-1] + half) | ~np.isfinite(xs)
    if np.any(bad):
        raise SampleOutOfRange(
            f"{int(bad.sum())} sample(s) outside [{x[0] - half}, {x[-1] + half}]"
        )
    idx = np.clip(np.rint((xs - x[0]) / grid.dx).astype(int), 0, grid.n_x - 1)
    counts = np.bincount(idx, minlength=grid.n_x).astype(float)
    return PositionalMarginal(x, counts / counts.sum())


def gaussian_marginal(grid: PhaseGrid, mean: float, std: float) -> PositionalMarginal:
    """Gaussian density sampled at the position nodes, normalized to unit mass."""
    if not std > 0:
        raise MeasureError("std must be positive")
    z = (grid.x_nodes - mean) / std
    return PositionalMarginal.normalized(grid.x_nodes, np.exp(-0.5 * z * z))


def read_marginal_csv(path, grid: PhaseGrid | None = None) -> PositionalMarginal:
    """Load a ``x,weight`` CSV.

    Weights within 1e-6 of unit mass are renormalized; anything further off is
    an error. If ``grid`` is given the positions must match its ``x_nodes``.
    """
    path = Path(path)
    xs, ws = [], []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["x", "weight"]:
            raise MeasureError(f"{path}: expected header 'x,weight'")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise MeasureError(f"{path}:{lineno}: expected 2 columns")
            try:
                xs.append(float(row[0]))
                ws.append(float(row[1]))
            except ValueError as exc:
                raise MeasureError(f"{path}:{lineno}: {exc}") from None
    w = np.asarray(ws)
    if w.size == 0:
        raise MeasureError(f"{path}: no rows")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise MeasureError(f"{path}: weights must be finite and nonnegative")
    total = w.sum()
    if abs(total - 1.0) >= FILE_MASS_TOL:
        raise MeasureError(f"{path}: weights sum to {total!r}, expected 1")
    rho = PositionalMarginal(np.asarray(xs), w / total)
    if grid is not None and not rho.matches(grid):
        raise MeasureError(f"{path}: positions do not match the grid x nodes")
    if grid is not None:
        rho = PositionalMarginal(grid.x_nodes, rho.weights)
    return rho


def write_marginal_csv(path, rho: PositionalMarginal) -> None:
    with Path(path).open("w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["x", "weight"])
        for x, w in zip(rho.x_nodes, rho.weights):
            out.writerow([repr(float(x)), repr(float(w))])
