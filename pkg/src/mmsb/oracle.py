"""Reference solutions used to validate the solver.

* :func:`natural_cubic_spline` is the Euclidean interpolant minimizing
  ``int |x''|^2``, the zero-noise target for mean paths.
* :func:`brute_force_solve` minimizes the chain objective directly over the
  constraint polytope with feasible Newton steps in the constraint null
  space.  It shares no projection code with :mod:`mmsb.bregman`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import null_space

from .errors import DegenerateKnots, InstanceTooLarge, OracleNotConverged
from .kernel import build_gibbs
from .problem import ProblemSpec

MAX_ORACLE_PAIRS = 10_000


@dataclass(frozen=True, eq=False)
class SplineCurve:
    """Piecewise cubic ``S(t) = a + b s + c s^2 + d s^3`` with ``s = t - t_k``."""

    knots: np.ndarray
    coefficients: np.ndarray  # (n_intervals, 4): a, b, c, d

    def _locate(self, t):
        t = np.asarray(t, dtype=float)
        k = self.knots
        span = k[-1] - k[0]
        if np.any(t < k[0] - 1e-12 * span) or np.any(t > k[-1] + 1e-12 * span):
            raise ValueError("evaluation time outside the knot range")
        idx = np.clip(np.searchsorted(k, t, side="right") - 1, 0, len(k) - 2)
        return t, idx, t - k[idx]

    def __call__(self, t):
        t, idx, s = self._locate(t)
        a, b, c, d = self.coefficients[idx].T
        out = a + s * (b + s * (c + s * d))
        return float(out) if out.ndim == 0 else out

    def derivative(self, t, order: int = 1):
        t, idx, s = self._locate(t)
        a, b, c, d = self.coefficients[idx].T
        if order == 1:
            out = b + s * (2 * c + 3 * d * s)
        elif order == 2:
            out = 2 * c + 6 * d * s
        elif order == 3:
            out = 6 * d + 0 * s
        else:
            raise ValueError("order must be 1, 2 or 3")
        return float(out) if np.ndim(out) == 0 else out

    def energy(self) -> float:
        """Exact ``int S''(t)^2 dt`` over the knot range."""
        h = np.diff(self.knots)
        m0 = 2 * self.coefficients[:, 2]
        m1 = m0 + 6 * self.coefficients[:, 3] * h
        return float(np.sum(h / 3.0 * (m0 * m0 + m0 * m1 + m1 * m1)))


def _thomas(lower, diag, upper, rhs):
    n = len(diag)
    c = np.zeros(n)
    d = np.zeros(n)
    c[0] = upper[0] / diag[0] if n > 1 else 0.0
    d[0] = rhs[0] / diag[0]
    for i in range(1, n):
        denom = diag[i] - lower[i - 1] * c[i - 1]
        if i < n - 1:
            c[i] = upper[i] / denom
        d[i] = (rhs[i] - lower[i - 1] * d[i - 1]) / denom
    x = np.zeros(n)
    x[-1] = d[-1]
    for i in range(n - 2, -1, -1):
        x[i] = d[i] - c[i] * x[i + 1]
    return x


def natural_cubic_spline(times, values) -> SplineCurve:
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    if t.ndim != 1 or t.shape != y.shape:
        raise DegenerateKnots("times and values must be 1-D and of equal length")
    if t.size < 2:
        raise DegenerateKnots("need at least two knots")
    h = np.diff(t)
    if not np.all(np.isfinite(t)) or np.any(h <= 0):
        raise DegenerateKnots("knot times must be strictly increasing")
    M = np.zeros(t.size)
    if t.size > 2:
        slopes = np.diff(y) / h
        rhs = 6.0 * np.diff(slopes)
        diag = 2.0 * (h[:-1] + h[1:])
        M[1:-1] = _thomas(h[1:-1], diag, h[1:-1], rhs)
    coef = np.column_stack(
        [
            y[:-1],
            np.diff(y) / h - h * (2 * M[:-1] + M[1:]) / 6.0,
            M[:-1] / 2.0,
            np.diff(M) / (6.0 * h),
        ]
    )
    return SplineCurve(t, coef)


# ---------------------------------------------------------------------------
# brute-force minimizer for tiny chains


@dataclass
class OracleResult:
    couplings: list
    objective: float
    grad_norm: float
    iterations: int

    def node_marginals(self) -> list[np.ndarray]:
        out = [c.sum(axis=1) for c in self.couplings]
        out.append(self.couplings[-1].sum(axis=0))
        return out


class _Layout:
    """Variable indexing and linear constraints ``A x = c`` for a chain."""

    def __init__(self, spec: ProblemSpec):
        g = spec.grid
        self.n = g.n_states
        self.n_v = g.n_v
        self.N = spec.N
        if self.N * self.n * self.n > MAX_ORACLE_PAIRS:
            raise InstanceTooLarge(
                f"{self.N} intervals x {self.n}^2 pairs exceeds {MAX_ORACLE_PAIRS}"
            )
        self.rhos = [m.weights for m in spec.marginals]
        ix = np.arange(self.n) // self.n_v
        live = [r[ix] > 0 for r in self.rhos]
        self.masks = [np.outer(live[i], live[i + 1]) for i in range(self.N)]
        self.offsets = np.cumsum([0] + [int(m.sum()) for m in self.masks])
        self.size = int(self.offsets[-1])
        self.state_pos = ix
        self._build_constraints()

    def unpack(self, x) -> list[np.ndarray]:
        out = []
        for i, m in enumerate(self.masks):
            c = np.zeros((self.n, self.n))
            c[m] = x[self.offsets[i] : self.offsets[i + 1]]
            out.append(c)
        return out

    def pack(self, tables) -> np.ndarray:
        return np.concatenate([t[m] for t, m in zip(tables, self.masks)])

    def _marginal_rows(self, i: int, side: str) -> np.ndarray:
        """Matrix mapping interval-i variables to its left or right marginal."""
        rows, cols = np.nonzero(self.masks[i])
        which = rows if side == "left" else cols
        R = np.zeros((self.n, self.size))
        R[which, self.offsets[i] + np.arange(rows.size)] = 1.0
        return R

    def _build_constraints(self):
        n_x = self.rhos[0].size
        agg = np.zeros((n_x, self.n))
        agg[self.state_pos, np.arange(self.n)] = 1.0
        blocks, rhs = [], []
        for k in range(self.N + 1):
            if k < self.N:
                L = self._marginal_rows(k, "left")
                blocks.append(agg @ L)
                rhs.append(self.rhos[k])
            if 0 < k:
                R = self._marginal_rows(k - 1, "right")
                if k < self.N:
                    blocks.append(R - L)
                    rhs.append(np.zeros(self.n))
                else:
                    blocks.append(agg @ R)
                    rhs.append(self.rhos[k])
        self.A = np.vstack(blocks)
        self.c = np.concatenate(rhs)

    def feasible_start(self) -> np.ndarray:
        mus = [r[self.state_pos] / self.n_v for r in self.rhos]
        return self.pack([np.outer(mus[i], mus[i + 1]) for i in range(self.N)])


def _objective_parts(spec: ProblemSpec):
    kernels = [build_gibbs(spec.grid, h, spec.epsilon, spec.cost_mode) for h in spec.durations]
    return kernels


def brute_force_solve(
    spec: ProblemSpec, tol: float = 1e-10, max_iter: int = 500
) -> OracleResult:
    """Minimize ``sum_i KL(pi_i | K_i)`` subject to the chain constraints.

    Starts from the product coupling of the data (velocities uniform) and
    takes Newton steps restricted to the null space of the constraint matrix,
    backtracking to stay strictly positive and decrease the objective.
    Converged when the gradient projected onto that null space has norm below
    ``tol``.
    """
    lay = _Layout(spec)
    kernels = _objective_parts(spec)
    logk = lay.pack([k.log_weights for k in kernels])
    const = sum(k.total for k in kernels)
    Z = null_space(lay.A)

    def f(x):
        return float(np.sum(x * (np.log(x) - logk)) - x.sum() + const)

    x = lay.feasible_start()
    if np.max(np.abs(lay.A @ x - lay.c)) > 1e-12:
        raise OracleNotConverged("could not build a feasible starting point")
    fx = f(x)
    gnorm = np.inf
    for it in range(1, max_iter + 1):
        g = np.log(x) - logk
        r = Z.T @ g
        gnorm = float(np.linalg.norm(r))
        # an empty null space means the feasible set is a single point
        if gnorm < tol or Z.shape[1] == 0:
            return OracleResult(lay.unpack(x), fx, gnorm, it - 1)
        # Newton step for min g.d + d.D^-1.d/2 s.t. A d = 0, D = diag(x), written
        # in range-space form so that tiny masses do not blow up the system
        AD = lay.A * x
        lam = np.linalg.lstsq(AD @ lay.A.T, AD @ g, rcond=None)[0]
        d = -x * (g - lay.A.T @ lam)
        slope = float(g @ d)
        step = 1.0
        neg = d < 0
        if np.any(neg):
            step = min(1.0, 0.99 * float(np.min(-x[neg] / d[neg])))
        # near the optimum the decrease is below the rounding of f itself
        slack = 64 * np.finfo(float).eps * max(1.0, abs(fx))
        while True:
            xn = x + step * d
            if np.all(xn > 0):
                fn = f(xn)
                if fn <= fx + 1e-4 * step * slope + slack or step < 1e-14:
                    break
            step *= 0.5
        x, fx = xn, f(xn)
    raise OracleNotConverged(f"projected gradient norm {gnorm:.3e} after {max_iter} iterations")


def kkt_residual(couplings, spec: ProblemSpec) -> float:
    """Norm of the objective gradient projected on the constraint tangent space."""
    lay = _Layout(spec)
    kernels = _objective_parts(spec)
    x = lay.pack([np.asarray(c, dtype=float) for c in couplings])
    logk = lay.pack([k.log_weights for k in kernels])
    Z = null_space(lay.A)
    return float(np.linalg.norm(Z.T @ (np.log(x) - logk)))
