"""Transition cost and Gibbs kernel of the stochastic double integrator.

The reference process is ``dx = v dt, dv = sigma dw``.  Over a step of length
``h`` its transition is Gaussian with mean ``(x0 + v0 h, v0)`` and covariance
``sigma^2 [[h^3/3, h^2/2], [h^2/2, h]]``; the quadratic form of the inverse
covariance is the pairwise cost below.  The Gibbs kernel ``exp(-C / eps)`` is
therefore the transition density for ``sigma^2 = eps / 2``, and the pinned
bridges use the same noise level so that bridges and kernel describe one
process.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import GridTooLarge, MMSBError, NonPositiveDuration, TauOutOfRange
from .phasegrid import PhaseGrid

KERNEL_MAGIC = b"MMSBKRN1"
DEFAULT_MEMORY_BUDGET = 2 * 1024**3  # bytes per kernel table


class CostMode(str, enum.Enum):
    EXACT = "exact"
    PAPER = "paper-normalized"

    @classmethod
    def parse(cls, value) -> "CostMode":
        if isinstance(value, cls):
            return value
        v = str(value).strip().lower()
        if v in ("paper", "paper_normalized", "paper-normalized"):
            return cls.PAPER
        if v == "exact":
            return cls.EXACT
        raise ValueError(f"unknown cost mode {value!r}")


def pair_cost(z0, z1, h: float, mode=CostMode.EXACT):
    """Cost of moving from state ``z0 = (x0, v0)`` to ``z1 = (x1, v1)`` in time ``h``.

    ``z0`` and ``z1`` may be arrays with a trailing axis of length 2; they
    broadcast against each other.

    With ``d = x1 - x0 - v0*h`` and ``w = v1 - v0`` the exact cost is
    ``12 d^2/h^3 - 12 d w/h^2 + 4 w^2/h``.  The paper-normalized variant uses
    ``d = x1 - x0 - v0`` and divides all three terms by ``h``; the two agree at
    ``h = 1``.  Both equal ``(3 r^2 + w^2) / h`` with ``r = 2 d/h - w`` (resp.
    ``r = 2 d - w``), which is nonnegative by construction.  ``r`` is formed as
    ``2 (x1 - x0)/h - (v0 + v1)`` so that swapping the endpoints and negating
    velocities flips its sign bit for bit, making time reversal exact.
    """
    if not h > 0:
        raise NonPositiveDuration(f"interval duration must be positive, got {h!r}")
    mode = CostMode.parse(mode)
    z0 = np.asarray(z0, dtype=float)
    z1 = np.asarray(z1, dtype=float)
    x0, v0 = z0[..., 0], z0[..., 1]
    x1, v1 = z1[..., 0], z1[..., 1]
    w = v1 - v0
    dx = x1 - x0
    if mode is CostMode.EXACT:
        dx = dx / h
    r = 2.0 * dx - (v0 + v1)
    out = (3.0 * r * r + w * w) / h
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class GibbsKernel:
    """Log-domain kernel ``log K[s, s'] = -C(z_s, z_s') / eps`` on one interval."""

    grid: PhaseGrid
    h: float
    epsilon: float
    cost_mode: CostMode
    log_weights: np.ndarray

    @property
    def n_states(self) -> int:
        return self.grid.n_states

    @cached_property
    def max_log(self) -> float:
        return float(self.log_weights.max())

    @cached_property
    def log_total(self) -> float:
        """``log sum_{s,s'} K[s,s']``."""
        m = self.max_log
        return m + float(np.log(np.exp(self.log_weights - m).sum()))

    @property
    def total(self) -> float:
        return float(np.exp(self.log_total))

    def linear(self, shift: bool = True) -> np.ndarray:
        """Materialize ``K`` (divided by its largest entry if ``shift``)."""
        return np.exp(self.log_weights - self.max_log) if shift else np.exp(self.log_weights)

    def transposed(self, perm=None) -> "GibbsKernel":
        """Kernel with roles of the endpoints swapped.

        With a state permutation ``perm`` the result is
        ``log K'[s, s'] = log K[perm[s'], perm[s]]``; passing the velocity flip
        gives the kernel of the time-reversed process.
        """
        lw = self.log_weights
        if perm is not None:
            lw = lw[np.ix_(perm, perm)]
        lw = np.ascontiguousarray(lw.T)
        lw.setflags(write=False)
        return GibbsKernel(self.grid, self.h, self.epsilon, self.cost_mode, lw)

    def scaled(self, factor: float) -> "GibbsKernel":
        """Same kernel multiplied by a positive constant."""
        lw = self.log_weights + np.log(factor)
        lw.setflags(write=False)
        return GibbsKernel(self.grid, self.h, self.epsilon, self.cost_mode, lw)


def build_gibbs(
    grid: PhaseGrid,
    h: float,
    epsilon: float,
    mode=CostMode.EXACT,
    memory_budget: int = DEFAULT_MEMORY_BUDGET,
) -> GibbsKernel:
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon!r}")
    if not h > 0:
        raise NonPositiveDuration(f"interval duration must be positive, got {h!r}")
    n = grid.n_states
    if n * n * 8 > memory_budget:
        raise GridTooLarge(
            f"kernel with {n} states needs {n * n * 8} bytes, budget is {memory_budget}"
        )
    z = grid.states
    lw = pair_cost(z[:, None, :], z[None, :, :], h, mode)
    lw *= -1.0 / epsilon
    lw.setflags(write=False)
    return GibbsKernel(grid, float(h), float(epsilon), CostMode.parse(mode), lw)


def dump_kernel(path, kernel: GibbsKernel) -> None:
    """Write log-weights as ``MMSBKRN1`` + u64 n_state + row-major LE float64."""
    n = kernel.n_states
    with Path(path).open("wb") as fh:
        fh.write(KERNEL_MAGIC)
        fh.write(struct.pack("<Q", n))
        fh.write(np.ascontiguousarray(kernel.log_weights, dtype="<f8").tobytes())


def load_kernel_dump(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < 16 or data[:8] != KERNEL_MAGIC:
        raise MMSBError(f"{path}: not a kernel dump")
    (n,) = struct.unpack("<Q", data[8:16])
    body = data[16:]
    if len(body) != n * n * 8:
        raise MMSBError(f"{path}: expected {n * n * 8} payload bytes, got {len(body)}")
    return np.frombuffer(body, dtype="<f8").reshape(n, n).astype(float)


@dataclass(frozen=True)
class BridgeMoments:
    mean: np.ndarray  # (x, v)
    covariance: np.ndarray  # 2x2


def _transition_cov(t: float, var: float) -> np.ndarray:
    return var * np.array([[t**3 / 3.0, t**2 / 2.0], [t**2 / 2.0, t]])


def bridge_coefficients(h: float, tau: float, epsilon: float):
    """Affine map and covariance of the pinned bridge at interior time ``tau``.

    Returns ``(A, B, cov)`` such that the bridge from ``z0`` (time 0) to ``z1``
    (time ``h``) has mean ``A @ z0 + B @ z1`` and covariance ``cov`` at ``tau``.
    """
    if not h > 0:
        raise NonPositiveDuration(f"interval duration must be positive, got {h!r}")
    if not 0.0 <= tau <= h:
        raise TauOutOfRange(f"tau={tau!r} outside [0, {h!r}]")
    eye = np.eye(2)
    if tau == 0.0:
        return eye, np.zeros((2, 2)), np.zeros((2, 2))
    if tau == h:
        return np.zeros((2, 2)), eye, np.zeros((2, 2))
    var = 0.5 * epsilon
    q_tau = _transition_cov(tau, var)
    q_h = _transition_cov(h, var)
    phi_rest = np.array([[1.0, h - tau], [0.0, 1.0]])
    phi_tau = np.array([[1.0, tau], [0.0, 1.0]])
    phi_h = np.array([[1.0, h], [0.0, 1.0]])
    # gain = Q(tau) Phi(h - tau)^T Q(h)^{-1}; Q(h) is symmetric positive definite
    gain = np.linalg.solve(q_h, phi_rest @ q_tau).T
    A = phi_tau - gain @ phi_h
    cov = q_tau - gain @ phi_rest @ q_tau
    cov = 0.5 * (cov + cov.T)
    return A, gain, cov


def bridge_moments(z0, z1, h: float, tau: float, epsilon: float) -> BridgeMoments:
    """Mean and covariance at ``tau`` of the reference process pinned at both ends.

    The mean is the cubic Hermite interpolant of the endpoint positions and
    velocities; the covariance vanishes at both ends and is linear in ``epsilon``.
    """
    A, B, cov = bridge_coefficients(h, tau, epsilon)
    mean = A @ np.asarray(z0, dtype=float) + B @ np.asarray(z1, dtype=float)
    return BridgeMoments(mean, cov)
