"""Phase-space marginals and mean paths between the constraint times.

Given the coupling ``pi_i`` of the states at ``t_i`` and ``t_{i+1}``, the law
at an intermediate time is the mixture over ``pi_i`` of reference bridges
pinned at both endpoint states.  The bridges are Gaussian with a covariance
that does not depend on the endpoints and a mean that is affine in them, so
mean paths only need the two marginals of ``pi_i``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bregman import ChainState, constraint_violation
from .errors import NotConverged, TimeOutOfRange
from .kernel import bridge_coefficients
from .phasegrid import DiscreteMeasure, moments
from .problem import ProblemSpec

# relative slack when matching a query time to a constraint time
_TIME_RTOL = 1e-12
_PAIR_CHUNK = 4096


@dataclass
class Solution:
    """A converged chain of couplings together with the problem it solves."""

    state: ChainState
    spec: ProblemSpec
    measures: list = field(init=False)

    def __post_init__(self):
        self.measures = self.state.node_measures()

    @classmethod
    def checked(cls, state: ChainState, spec: ProblemSpec) -> "Solution":
        viol = constraint_violation(state, spec.marginals)
        if not viol < spec.tolerance:
            raise NotConverged(f"constraint violation {viol:.3e} >= tolerance {spec.tolerance:.1e}")
        return cls(state, spec)

    @property
    def times(self) -> tuple[float, ...]:
        return self.spec.times

    def locate(self, t: float) -> tuple[int, float]:
        """``(i, tau)`` with ``t = t_i + tau``; ``tau == 0`` marks a node."""
        times = self.times
        scale = _TIME_RTOL * max(1.0, abs(times[0]), abs(times[-1]))
        if not (times[0] - scale <= t <= times[-1] + scale):
            raise TimeOutOfRange(f"t={t!r} outside [{times[0]}, {times[-1]}]")
        for i, ti in enumerate(times):
            if abs(t - ti) <= scale:
                return i, 0.0
        i = int(np.searchsorted(times, t)) - 1
        return i, float(t - times[i])


def _state_mean(m: np.ndarray, states: np.ndarray) -> np.ndarray:
    return (m @ states) / m.sum()


def _cell_precision(cov: np.ndarray, grid) -> np.ndarray:
    # add the variance of a uniform cell so that bridges much narrower than
    # the grid land on the cell holding their mean
    return np.linalg.inv(cov + np.diag([grid.dx**2, grid.dv**2]) / 12.0)


def marginal_at(t: float, sol: Solution, prune: float = 1e-15) -> DiscreteMeasure:
    """Phase-space law at time ``t``.

    At a constraint time the stored node marginal is returned as is.  In
    between, every pair ``(s0, s1)`` with ``pi[s0, s1] > prune`` contributes
    its bridge Gaussian, widened by the variance of one grid cell and
    evaluated at the grid nodes.  Each such Gaussian is renormalized to unit
    mass on the grid before it is weighted by ``pi[s0, s1]``, so a bridge narrower than the grid spacing still carries
    exactly its coupling mass; the sum is renormalized at the end.
    """
    i, tau = sol.locate(t)
    if tau == 0.0:
        return sol.measures[i]
    grid = sol.spec.grid
    kernel = sol.state.kernels[i]
    A, B, cov = bridge_coefficients(kernel.h, tau, sol.spec.epsilon)
    P = _cell_precision(cov, grid)
    pi = sol.state.couplings[i].dense()
    s0, s1 = np.nonzero(pi > prune)
    w = pi[s0, s1]
    Z = grid.states
    means = Z[s0] @ A.T + Z[s1] @ B.T
    X, V = grid.X, grid.V
    out = np.zeros(grid.n_states)
    for lo in range(0, w.size, _PAIR_CHUNK):
        hi = lo + _PAIR_CHUNK
        dx = X[None, :] - means[lo:hi, 0:1]
        dv = V[None, :] - means[lo:hi, 1:2]
        q = -0.5 * (P[0, 0] * dx * dx + 2.0 * P[0, 1] * dx * dv + P[1, 1] * dv * dv)
        # the cell-area and Gaussian normalizing constants cancel here
        q -= q.max(axis=1, keepdims=True)
        with np.errstate(under="ignore"):
            np.exp(q, out=q)
        q /= q.sum(axis=1, keepdims=True)
        out += w[lo:hi] @ q
    return DiscreteMeasure.normalized(grid, out)


def mean_at(t: float, sol: Solution) -> tuple[float, float]:
    """Mean ``(x, v)`` at ``t`` from the coupling marginals alone."""
    i, tau = sol.locate(t)
    Z = sol.spec.grid.states
    if tau == 0.0:
        m = moments(sol.measures[i])
        return m.mean_x, m.mean_v
    kernel = sol.state.kernels[i]
    A, B, _ = bridge_coefficients(kernel.h, tau, sol.spec.epsilon)
    z0 = _state_mean(sol.state.left(i), Z)
    z1 = _state_mean(sol.state.right(i), Z)
    mean = A @ z0 + B @ z1
    return float(mean[0]), float(mean[1])


def mean_path(sol: Solution, times) -> list[tuple[float, float, float]]:
    return [(float(t), *mean_at(float(t), sol)) for t in times]


def mixture_moments(t: float, sol: Solution) -> tuple[np.ndarray, np.ndarray]:
    """Mean and covariance of the full bridge mixture at ``t``.

    Enumerates every coupled pair; used to cross-check :func:`mean_at`.
    """
    i, tau = sol.locate(t)
    Z = sol.spec.grid.states
    if tau == 0.0:
        w = sol.measures[i].weights
        mean = w @ Z
        d = Z - mean
        return mean, (d.T * w) @ d
    kernel = sol.state.kernels[i]
    A, B, cov = bridge_coefficients(kernel.h, tau, sol.spec.epsilon)
    pi = sol.state.couplings[i].dense()
    total = pi.sum()
    n = Z.shape[0]
    first = np.zeros(2)
    second = np.zeros((2, 2))
    for s0 in range(n):
        row = pi[s0]
        # bridge means for all partners of s0
        m = (A @ Z[s0])[None, :] + Z @ B.T
        first += row @ m
        second += (m.T * row) @ m
    mean = first / total
    return mean, cov + second / total - np.outer(mean, mean)
