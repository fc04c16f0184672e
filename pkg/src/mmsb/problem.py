"""Problem definition: constraint times, noise level, grid and positional data."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .kernel import DEFAULT_MEMORY_BUDGET, CostMode, GibbsKernel, build_gibbs
from .phasegrid import PhaseGrid, PositionalMarginal

REPRESENTATIONS = ("dense", "scaling")
SWEEP_ORDERS = ("cyclic", "symmetric", "random")


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    times: tuple[float, ...]
    epsilon: float
    grid: PhaseGrid
    marginals: tuple[PositionalMarginal, ...]
    cost_mode: CostMode = CostMode.EXACT
    tolerance: float = 1e-8
    max_sweeps: int = 5000
    representation: str = "scaling"
    order: str = "cyclic"
    trace: bool = False
    output_dir: Path | None = None
    marginal_paths: tuple[Path, ...] = ()
    seed: int = 0
    memory_budget: int = DEFAULT_MEMORY_BUDGET
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "marginals", tuple(self.marginals))
        object.__setattr__(self, "marginal_paths", tuple(Path(p) for p in self.marginal_paths))
        try:
            object.__setattr__(self, "cost_mode", CostMode.parse(self.cost_mode))
        except ValueError as exc:
            raise ValidationError("cost_mode", str(exc)) from None
        if len(times) < 2:
            raise ValidationError("times", "need at least two constraint times")
        if not all(np.isfinite(times)) or any(b <= a for a, b in zip(times, times[1:])):
            raise ValidationError("times", "must be finite and strictly increasing")
        if not (np.isfinite(self.epsilon) and self.epsilon > 0):
            raise ValidationError("epsilon", "must be positive")
        if not (np.isfinite(self.tolerance) and self.tolerance > 0):
            raise ValidationError("tolerance", "must be positive")
        if int(self.max_sweeps) < 1:
            raise ValidationError("max_sweeps", "must be >= 1")
        if self.representation not in REPRESENTATIONS:
            raise ValidationError("representation", f"must be one of {REPRESENTATIONS}")
        if self.order not in SWEEP_ORDERS:
            raise ValidationError("order", f"must be one of {SWEEP_ORDERS}")
        if len(self.marginals) != len(times):
            raise ValidationError(
                "marginals", f"expected {len(times)} marginals, got {len(self.marginals)}"
            )
        for i, rho in enumerate(self.marginals):
            if not rho.matches(self.grid):
                raise ValidationError("marginals", f"marginal {i} does not match the grid")

    @property
    def N(self) -> int:
        """Number of intervals (one less than the number of marginals)."""
        return len(self.times) - 1

    @property
    def durations(self) -> np.ndarray:
        return np.diff(np.asarray(self.times))

    def replace(self, **changes) -> "ProblemSpec":
        return dataclasses.replace(self, **changes)

    def reversed(self) -> "ProblemSpec":
        """Same problem with time running backwards (marginal list reversed)."""
        t = np.asarray(self.times)
        return self.replace(
            times=tuple(t[0] + t[-1] - t[::-1]),
            marginals=self.marginals[::-1],
            marginal_paths=self.marginal_paths[::-1],
        )


def build_kernels(spec: ProblemSpec) -> list[GibbsKernel]:
    """One kernel per interval; intervals of equal length share a kernel.

    Durations that differ only by round-off (e.g. from ``linspace``) count as
    equal.
    """
    built: list[GibbsKernel] = []
    out = []
    for h in spec.durations:
        h = float(h)
        match = next((k for k in built if abs(k.h - h) <= 1e-12 * h), None)
        if match is None:
            match = build_gibbs(spec.grid, h, spec.epsilon, spec.cost_mode, spec.memory_budget)
            built.append(match)
        out.append(match)
    return out
