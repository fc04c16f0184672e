"""Problem instances shared by the unit and acceptance tests."""

from __future__ import annotations

import numpy as np

from mmsb.phasegrid import PhaseGrid, PositionalMarginal, gaussian_marginal
from mmsb.problem import ProblemSpec

SPLINE_KNOTS = ((0.0, 0.0), (0.5, 1.0), (1.0, 0.0))


def mixture(grid: PhaseGrid, *parts) -> PositionalMarginal:
    """Normalized sum of ``weight * gaussian(mean, std)`` sampled at the x nodes."""
    total = sum(w * gaussian_marginal(grid, m, s).weights for w, m, s in parts)
    return PositionalMarginal.normalized(grid.x_nodes, total)


def chain_spec(n: int = 32, representation: str = "scaling", **kw) -> ProblemSpec:
    """Four multimodal marginals at uniform times on an ``n x n`` grid, eps = 0.1.

    With ``n = 32`` this is the constraint-satisfaction benchmark instance.
    """
    grid = PhaseGrid.uniform(-0.5, 0.5, n, -2.0, 2.0, n)
    rhos = [
        mixture(grid, (1.0, -0.2, 0.08)),
        mixture(grid, (0.5, -0.1, 0.05), (0.5, 0.1, 0.06)),
        mixture(grid, (1.0, 0.05, 0.08)),
        mixture(grid, (1.0, 0.15, 0.06)),
    ]
    kw.setdefault("epsilon", 0.1)
    return ProblemSpec(
        times=(0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0),
        grid=grid,
        marginals=rhos,
        representation=representation,
        **kw,
    )


def spline_spec(epsilon: float, n: int = 48, representation: str = "scaling") -> ProblemSpec:
    """Narrow Gaussian marginals at the spline knots on x in [-1, 2], v in [-6, 6]."""
    grid = PhaseGrid.uniform(-1.0, 2.0, n, -6.0, 6.0, n)
    rhos = [gaussian_marginal(grid, x, 0.05) for _, x in SPLINE_KNOTS]
    return ProblemSpec(
        times=tuple(t for t, _ in SPLINE_KNOTS),
        epsilon=epsilon,
        grid=grid,
        marginals=rhos,
        representation=representation,
    )


def tiny_spec(rng: np.random.Generator, **kw) -> ProblemSpec:
    """Random chain with at most 3x3 states and N <= 3, kernels kept moderate.

    Entries of the optimal couplings must stay well inside double range for
    the brute-force oracle, hence the narrow position range and eps >= 1.
    """
    while True:
        n_x, n_v = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        if n_x * n_v > 1:
            break
    N = int(rng.integers(1, 4))
    x = np.linspace(-0.5, 0.5, n_x) if n_x > 1 else np.array([0.0])
    v = np.linspace(-1.0, 1.0, n_v) if n_v > 1 else np.array([0.0])
    grid = PhaseGrid(x, v)
    rhos = [PositionalMarginal.normalized(x, rng.random(n_x) + 0.1) for _ in range(N + 1)]
    times = np.cumsum(np.r_[0.0, rng.uniform(0.5, 1.5, N)])
    kw.setdefault("tolerance", 1e-12)
    kw.setdefault("max_sweeps", 100_000)
    return ProblemSpec(
        times=tuple(times),
        epsilon=float(rng.choice([1.0, 2.0, 4.0])),
        grid=grid,
        marginals=rhos,
        **kw,
    )
