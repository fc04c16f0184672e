"""KL (Bregman) projections for a chain of consecutive-time couplings.

The unknowns are couplings ``pi_i`` between the phase-space states at times
``t_i`` and ``t_{i+1}``.  Three kinds of constraint set are projected onto in
turn: the first node (left marginal of ``pi_0`` has positional marginal
``rho_0``), interior nodes (``pi_{i-1}`` and ``pi_i`` agree on ``mu_i`` and
``mu_i`` has positional marginal ``rho_i``) and the last node.  Every update
multiplies a coupling by a function of one endpoint state, so couplings can be
kept either as dense tables or in scaling form ``diag(a) K diag(b)``.

Conventions: ``0/0 = 0`` in every ratio; asking for mass where the coupling
has none (even after an exact log-domain recomputation) raises
:class:`StarvedConstraint`.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import MMSBError, StarvedConstraint, SupportMismatch
from .kernel import GibbsKernel
from .phasegrid import DiscreteMeasure, PhaseGrid, PositionalMarginal
from .problem import ProblemSpec, build_kernels

NEG_INF = -np.inf
# largest exponent applied in one multiplication, keeps exp() finite
_EXP_CHUNK = 600.0


def _log(x):
    with np.errstate(divide="ignore"):
        return np.log(x)


def _lse(a: np.ndarray, axis: int) -> np.ndarray:
    """log-sum-exp that maps all ``-inf`` slices to ``-inf`` without warnings."""
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore", under="ignore"):
        out = np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True)) + m
    return np.squeeze(out, axis=axis)


def _sub_log(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    """``num - den`` in log domain with ``log 0 - anything = log 0``."""
    with np.errstate(invalid="ignore"):
        out = num - den
    return np.where(np.isneginf(num), NEG_INF, out)


def _weights(rho) -> np.ndarray:
    if isinstance(rho, PositionalMarginal):
        return rho.weights
    return np.asarray(rho, dtype=float)


def _scale_axis(mass: np.ndarray, log_f: np.ndarray, axis: int) -> None:
    peak = np.max(log_f, initial=NEG_INF)
    pieces = max(1, int(np.ceil(peak / _EXP_CHUNK))) if np.isfinite(peak) else 1
    with np.errstate(under="ignore"):
        f = np.exp(log_f / pieces)
    shape = (-1, 1) if axis == 0 else (1, -1)
    for _ in range(pieces):
        mass *= f.reshape(shape)


# ---------------------------------------------------------------------------
# coupling representations


class DenseCoupling:
    """Coupling held as an explicit mass table ``mass[s, s']``."""

    kind = "dense"

    def __init__(self, mass, kernel: GibbsKernel | None = None):
        self.mass = np.array(mass, dtype=float)
        self.kernel = kernel

    @classmethod
    def from_kernel(cls, kernel: GibbsKernel) -> "DenseCoupling":
        with np.errstate(under="ignore"):
            mass = np.exp(kernel.log_weights - kernel.log_total)
        return cls(mass, kernel)

    @property
    def shape(self):
        return self.mass.shape

    def left_marginal(self) -> np.ndarray:
        return self.mass.sum(axis=1)

    def right_marginal(self) -> np.ndarray:
        return self.mass.sum(axis=0)

    def log_left_exact(self, rows) -> np.ndarray:
        return _log(self.mass[rows].sum(axis=1))

    def log_right_exact(self, cols) -> np.ndarray:
        return _log(self.mass[:, cols].sum(axis=0))

    def scale_left(self, log_f) -> None:
        _scale_axis(self.mass, np.asarray(log_f, dtype=float), axis=0)

    def scale_right(self, log_f) -> None:
        _scale_axis(self.mass, np.asarray(log_f, dtype=float), axis=1)

    def dense(self) -> np.ndarray:
        return self.mass

    def total_mass(self) -> float:
        return float(self.mass.sum())

    def copy(self) -> "DenseCoupling":
        return DenseCoupling(self.mass, self.kernel)

    def transpose(self) -> "DenseCoupling":
        k = self.kernel.transposed() if self.kernel is not None else None
        return DenseCoupling(self.mass.T, k)

    def mirrored(self, flip: np.ndarray) -> "DenseCoupling":
        """Time reversal: ``new[s, s'] = mass[flip[s'], flip[s]]``."""
        k = self.kernel.transposed(flip) if self.kernel is not None else None
        return DenseCoupling(self.mass[np.ix_(flip, flip)].T, k)

    def kl(self, kernel: GibbsKernel | None = None, left=None, right=None) -> float:
        kernel = kernel or self.kernel
        if kernel is None:
            raise MMSBError("a kernel is needed to evaluate the objective")
        return _table_kl(self.mass, kernel)


class ScalingCoupling:
    """Coupling ``pi[s, s'] = exp(log_a[s] + log K[s, s'] + log_b[s'])``.

    Marginals are evaluated with a stabilized linear kernel
    ``Kt = exp(log K + fa (+) fb - c)`` and scalings ``u, v`` close to one,
    so that ``log_a = fa + log u`` and ``log_b = fb + log v``.  Whenever
    ``u`` or ``v`` grows past :attr:`absorb_at` the scalings are folded into
    ``fa, fb`` and ``Kt`` is rebuilt.  Entries of ``Kt`` that underflow carry
    less than ~1e-300 mass; when a whole position underflows the projections
    fall back to exact log-sum-exp over the rows involved.
    """

    kind = "scaling"
    absorb_at = 1e50

    def __init__(self, kernel: GibbsKernel, log_a, log_b):
        n = kernel.n_states
        self.kernel = kernel
        self._fa = np.array(log_a, dtype=float).reshape(n)
        self._fb = np.array(log_b, dtype=float).reshape(n)
        self._u = np.ones(n)
        self._v = np.ones(n)
        self.rebuilds = 0
        self._rebuild()

    @classmethod
    def from_kernel(cls, kernel: GibbsKernel) -> "ScalingCoupling":
        n = kernel.n_states
        return cls(kernel, np.full(n, -kernel.log_total), np.zeros(n))

    @property
    def shape(self):
        n = self.kernel.n_states
        return (n, n)

    @property
    def log_a(self) -> np.ndarray:
        return self._fa + _log(self._u)

    @property
    def log_b(self) -> np.ndarray:
        return self._fb + _log(self._v)

    def _rebuild(self) -> None:
        self._fa = self.log_a
        self._fb = self.log_b
        self._u = np.ones_like(self._fa)
        self._v = np.ones_like(self._fb)
        L = self.kernel.log_weights + self._fa[:, None]
        L += self._fb[None, :]
        c = float(L.max())
        if not np.isfinite(c):
            c = 0.0
        L -= c
        with np.errstate(under="ignore"):
            np.exp(L, out=L)
        self._kt = L
        self._scale = float(np.exp(c))
        self.rebuilds += 1

    def left_marginal(self) -> np.ndarray:
        return self._scale * self._u * (self._kt @ self._v)

    def right_marginal(self) -> np.ndarray:
        return self._scale * self._v * (self._kt.T @ self._u)

    def log_left_exact(self, rows) -> np.ndarray:
        lw = self.kernel.log_weights[rows] + self.log_b[None, :]
        return self.log_a[rows] + _lse(lw, axis=1)

    def log_right_exact(self, cols) -> np.ndarray:
        lw = self.kernel.log_weights[:, cols] + self.log_a[:, None]
        return self.log_b[cols] + _lse(lw, axis=0)

    def _scaled(self, s: np.ndarray, f_log: np.ndarray):
        with np.errstate(over="ignore", under="ignore"):
            out = s * np.exp(f_log)
        ok = np.all(np.isfinite(out)) and np.max(out, initial=0.0) <= self.absorb_at
        return out, ok

    def scale_left(self, log_f) -> None:
        log_f = np.asarray(log_f, dtype=float)
        u, ok = self._scaled(self._u, log_f)
        if ok:
            self._u = u
        else:
            self._fa = self.log_a + log_f
            self._u = np.ones_like(self._u)
            self._rebuild()

    def scale_right(self, log_f) -> None:
        log_f = np.asarray(log_f, dtype=float)
        v, ok = self._scaled(self._v, log_f)
        if ok:
            self._v = v
        else:
            self._fb = self.log_b + log_f
            self._v = np.ones_like(self._v)
            self._rebuild()

    def dense(self) -> np.ndarray:
        return self._scale * (self._u[:, None] * self._kt * self._v[None, :])

    def total_mass(self) -> float:
        return float(self.left_marginal().sum())

    def copy(self) -> "ScalingCoupling":
        return ScalingCoupling(self.kernel, self.log_a, self.log_b)

    def transpose(self) -> "ScalingCoupling":
        return ScalingCoupling(self.kernel.transposed(), self.log_b, self.log_a)

    def mirrored(self, flip: np.ndarray) -> "ScalingCoupling":
        return ScalingCoupling(self.kernel.transposed(flip), self.log_b[flip], self.log_a[flip])

    def kl(self, kernel: GibbsKernel | None = None, left=None, right=None) -> float:
        # log(pi / K) = log_a[s] + log_b[s'], so the entropy term only needs marginals
        left = self.left_marginal() if left is None else left
        right = self.right_marginal() if right is None else right
        la, lb = self.log_a, self.log_b
        pl, pr = left > 0, right > 0
        return float(
            np.sum(left[pl] * la[pl]) + np.sum(right[pr] * lb[pr]) - left.sum() + self.kernel.total
        )


Coupling = DenseCoupling | ScalingCoupling


def make_coupling(kernel: GibbsKernel, representation: str = "scaling") -> Coupling:
    """Normalized prior ``K / sum(K)`` in the requested representation."""
    if representation == "dense":
        return DenseCoupling.from_kernel(kernel)
    if representation == "scaling":
        return ScalingCoupling.from_kernel(kernel)
    raise ValueError(f"unknown representation {representation!r}")


# ---------------------------------------------------------------------------
# objective


def kl(alpha, beta) -> float:
    """Generalized KL divergence ``sum alpha log(alpha/beta) - alpha + beta``."""
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if alpha.shape != beta.shape:
        raise ValueError(f"shape mismatch {alpha.shape} vs {beta.shape}")
    pos = alpha > 0
    if np.any(beta[pos] <= 0):
        raise SupportMismatch("alpha has mass where beta is zero")
    a = alpha[pos]
    return float(np.sum(a * np.log(a / beta[pos])) - alpha.sum() + beta.sum())


# ---------------------------------------------------------------------------
# chain state


@dataclass
class ChainState:
    """Couplings ``pi_0 .. pi_{N-1}`` plus cached marginals.

    ``left(i)`` / ``right(i)`` return the two marginals of ``pi_i``; a cache
    entry is dropped whenever the coupling is rescaled on the opposite side
    and set directly when a projection fixes it.  The node marginal ``mu_i``
    is the left marginal of ``pi_i`` (right marginal of ``pi_{N-1}`` for the
    last node).
    """

    couplings: list
    kernels: list
    sweeps: int = 0
    violation_trace: list = field(default_factory=list)
    objective_trace: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.couplings) != len(self.kernels) or not self.couplings:
            raise ValueError("need one kernel per coupling and at least one coupling")
        self._left = [None] * self.N
        self._right = [None] * self.N

    @property
    def N(self) -> int:
        return len(self.couplings)

    @property
    def grid(self) -> PhaseGrid:
        return self.kernels[0].grid

    def left(self, i: int) -> np.ndarray:
        if self._left[i] is None:
            self._left[i] = self.couplings[i].left_marginal()
        return self._left[i]

    def right(self, i: int) -> np.ndarray:
        if self._right[i] is None:
            self._right[i] = self.couplings[i].right_marginal()
        return self._right[i]

    def invalidate(self, i: int | None = None) -> None:
        idx = range(self.N) if i is None else [i]
        for j in idx:
            self._left[j] = None
            self._right[j] = None

    def node_marginal(self, i: int) -> np.ndarray:
        return self.left(i) if i < self.N else self.right(self.N - 1)

    def node_measures(self) -> list[DiscreteMeasure]:
        return [
            DiscreteMeasure.normalized(self.grid, self.node_marginal(i)) for i in range(self.N + 1)
        ]

    def copy(self) -> "ChainState":
        out = ChainState(
            [c.copy() for c in self.couplings],
            list(self.kernels),
            self.sweeps,
            list(self.violation_trace),
            list(self.objective_trace),
        )
        return out


def initial_state(kernels: list[GibbsKernel], representation: str = "scaling") -> ChainState:
    return ChainState([make_coupling(k, representation) for k in kernels], list(kernels))


def mirror_state(state: ChainState) -> ChainState:
    """The same path law seen backwards in time, velocities negated."""
    flip = state.grid.velocity_flip()
    couplings = [c.mirrored(flip) for c in reversed(state.couplings)]
    return ChainState(couplings, [c.kernel for c in couplings], state.sweeps)


# ---------------------------------------------------------------------------
# projections


def _n_v(n_states: int, rho: np.ndarray) -> int:
    n_v, rem = divmod(n_states, rho.size)
    if rem:
        raise ValueError(f"{n_states} states are not a multiple of {rho.size} positions")
    return n_v


def _positional_factor(m: np.ndarray, rho: np.ndarray, exact_log: Callable):
    """Log scale factors that make the positional marginal of ``m`` equal ``rho``.

    Returns ``(log_f, log_m)``; positions where ``m`` underflowed entirely are
    re-evaluated through ``exact_log(rows)``.
    """
    n_v = _n_v(m.size, rho)
    n_x = rho.size
    need = rho > 0
    log_m = _log(m)
    mx = m.reshape(n_x, n_v).sum(axis=1)
    log_mx = _log(mx)
    lost = need & ~(mx > 0)
    if np.any(lost):
        rows = (np.flatnonzero(lost)[:, None] * n_v + np.arange(n_v)).ravel()
        log_m[rows] = exact_log(rows)
        log_mx[lost] = _lse(log_m[rows].reshape(-1, n_v), axis=1)
    starved = need & np.isneginf(log_mx)
    if np.any(starved):
        raise StarvedConstraint(
            f"positions {np.flatnonzero(starved).tolist()} need mass but the coupling has none"
        )
    log_ratio = np.where(need, _sub_log(_log(rho), log_mx), NEG_INF)
    return np.repeat(log_ratio, n_v), log_m


def _new_marginal(log_m: np.ndarray, log_f: np.ndarray) -> np.ndarray:
    with np.errstate(under="ignore"):
        return np.exp(np.where(np.isneginf(log_f), NEG_INF, log_m + log_f))


def _interior_factors(m_left, m_right, rho, exact_left: Callable, exact_right: Callable):
    """Scale factors for the two couplings meeting at an interior node.

    ``m_left`` is the right marginal of the earlier coupling and ``m_right``
    the left marginal of the later one.  The shared node marginal becomes
    ``mu = rho[ix] * g / Z[ix]`` with ``g = sqrt(m_left * m_right)`` (taken in
    log domain) and ``Z[ix] = sum_iv g``.
    """
    n_v = _n_v(m_left.size, rho)
    n_x = rho.size
    need = rho > 0
    log_l = _log(m_left)
    log_r = _log(m_right)
    log_g = 0.5 * (log_l + log_r)
    log_z = _lse(log_g.reshape(n_x, n_v), axis=1)
    lost = need & np.isneginf(log_z)
    if np.any(lost):
        rows = (np.flatnonzero(lost)[:, None] * n_v + np.arange(n_v)).ravel()
        log_l[rows] = exact_left(rows)
        log_r[rows] = exact_right(rows)
        log_g[rows] = 0.5 * (log_l[rows] + log_r[rows])
        log_z[lost] = _lse(log_g[rows].reshape(-1, n_v), axis=1)
    starved = need & np.isneginf(log_z)
    if np.any(starved):
        raise StarvedConstraint(
            f"positions {np.flatnonzero(starved).tolist()} need mass but the couplings have none"
        )
    log_scale = np.where(need, _sub_log(_log(rho), log_z), NEG_INF)
    log_mu = np.repeat(log_scale, n_v) + log_g
    log_mu = np.where(np.isnan(log_mu), NEG_INF, log_mu)
    return _sub_log(log_mu, log_l), _sub_log(log_mu, log_r), log_mu


def _project_first(state: ChainState, rho: np.ndarray) -> None:
    c = state.couplings[0]
    log_f, log_m = _positional_factor(state.left(0), rho, c.log_left_exact)
    c.scale_left(log_f)
    state._right[0] = None
    state._left[0] = _new_marginal(log_m, log_f)


def _project_last(state: ChainState, rho: np.ndarray) -> None:
    j = state.N - 1
    c = state.couplings[j]
    log_f, log_m = _positional_factor(state.right(j), rho, c.log_right_exact)
    c.scale_right(log_f)
    state._left[j] = None
    state._right[j] = _new_marginal(log_m, log_f)


def _project_interior(state: ChainState, i: int, rho: np.ndarray) -> None:
    cl, cr = state.couplings[i - 1], state.couplings[i]
    log_fl, log_fr, log_mu = _interior_factors(
        state.right(i - 1), state.left(i), rho, cl.log_right_exact, cr.log_left_exact
    )
    cl.scale_right(log_fl)
    cr.scale_left(log_fr)
    with np.errstate(under="ignore"):
        mu = np.exp(log_mu)
    state._left[i - 1] = None
    state._right[i - 1] = mu
    state._right[i] = None
    state._left[i] = mu.copy()


def project(state: ChainState, k: int, rho) -> None:
    """Apply the projection onto constraint set ``k`` (0..N) in place."""
    rho = _weights(rho)
    if k == 0:
        _project_first(state, rho)
    elif k == state.N:
        _project_last(state, rho)
    elif 0 < k < state.N:
        _project_interior(state, k, rho)
    else:
        raise IndexError(f"constraint index {k} outside 0..{state.N}")


def project_k0(pi: Coupling, rho, inplace: bool = False) -> Coupling:
    """KL projection fixing the positional marginal of the left endpoint."""
    rho = _weights(rho)
    c = pi if inplace else pi.copy()
    log_f, _ = _positional_factor(c.left_marginal(), rho, c.log_left_exact)
    c.scale_left(log_f)
    return c


def project_kn(pi: Coupling, rho, inplace: bool = False) -> Coupling:
    """KL projection fixing the positional marginal of the right endpoint."""
    rho = _weights(rho)
    c = pi if inplace else pi.copy()
    log_f, _ = _positional_factor(c.right_marginal(), rho, c.log_right_exact)
    c.scale_right(log_f)
    return c


def project_ki(pi_left: Coupling, pi_right: Coupling, rho, inplace: bool = False):
    """KL projection at an interior node shared by ``pi_left`` and ``pi_right``."""
    rho = _weights(rho)
    cl = pi_left if inplace else pi_left.copy()
    cr = pi_right if inplace else pi_right.copy()
    log_fl, log_fr, _ = _interior_factors(
        cl.right_marginal(), cr.left_marginal(), rho, cl.log_right_exact, cr.log_left_exact
    )
    cl.scale_right(log_fl)
    cr.scale_left(log_fr)
    return cl, cr


def sweep_order(N: int, order: str = "cyclic", rng: np.random.Generator | None = None):
    if order == "cyclic":
        return list(range(N + 1))
    if order == "symmetric":
        return list(range(N + 1)) + list(range(N - 1, 0, -1))
    if order == "random":
        rng = rng or np.random.default_rng()
        return [int(k) for k in rng.permutation(N + 1)]
    raise ValueError(f"unknown sweep order {order!r}")


def sweep(state: ChainState, rhos, order: str = "cyclic", rng=None) -> ChainState:
    """One pass over all constraint sets (index order 0..N by default)."""
    if len(rhos) != state.N + 1:
        raise ValueError(f"expected {state.N + 1} marginals, got {len(rhos)}")
    for k in sweep_order(state.N, order, rng):
        project(state, k, rhos[k])
    state.sweeps += 1
    return state


def constraint_violation(state: ChainState, rhos) -> float:
    """Largest L1 mismatch over all node constraints.

    Checks the positional projection of every coupling marginal against its
    ``rho_i`` and, at interior nodes, the two coupling marginals against each
    other.
    """
    rhos = [_weights(r) for r in rhos]
    n_x = rhos[0].size
    worst = 0.0

    def pos_err(m, rho):
        return float(np.abs(m.reshape(n_x, -1).sum(axis=1) - rho).sum())

    for i in range(state.N):
        left, right = state.left(i), state.right(i)
        worst = max(worst, pos_err(left, rhos[i]), pos_err(right, rhos[i + 1]))
        if i > 0:
            worst = max(worst, float(np.abs(state.right(i - 1) - left).sum()))
    return worst


def _table_kl(pi: np.ndarray, kernel: GibbsKernel) -> float:
    pos = pi > 0
    lk = kernel.log_weights[pos]
    if np.any(np.isneginf(lk)):
        raise SupportMismatch("coupling has mass where the kernel vanishes")
    p = pi[pos]
    return float(np.sum(p * (np.log(p) - lk)) - pi.sum() + kernel.total)


def objective(state: ChainState, kernels=None) -> float:
    """``J = sum_i KL(pi_i | K_i)``.

    By default each coupling is measured against its own kernel; other
    kernels of the same shape may be passed explicitly.
    """
    total = 0.0
    for i, c in enumerate(state.couplings):
        k = c.kernel if kernels is None else kernels[i]
        if isinstance(c, ScalingCoupling) and k is c.kernel:
            total += c.kl(left=state.left(i), right=state.right(i))
        else:
            total += _table_kl(c.dense(), k)
    return total


# ---------------------------------------------------------------------------
# driver


@dataclass
class SolveReport:
    converged: bool
    sweeps: int
    violation: float
    violation_trace: list
    objective_trace: list
    seconds: float
    representation: str = "scaling"
    tolerance: float = 1e-8

    def to_dict(self) -> dict:
        return {
            "converged": self.converged,
            "sweeps": self.sweeps,
            "violation": self.violation,
            "objective": self.objective_trace[-1] if self.objective_trace else None,
            "seconds": self.seconds,
            "representation": self.representation,
            "tolerance": self.tolerance,
        }


TraceHook = Callable[[int, float, float, float], None]


def solve(
    spec: ProblemSpec,
    kernels: list[GibbsKernel] | None = None,
    trace: TraceHook | None = None,
    max_sweeps: int | None = None,
    tolerance: float | None = None,
) -> tuple[ChainState, SolveReport]:
    """Run cyclic Bregman projections from the normalized prior.

    Stops once :func:`constraint_violation` drops below the tolerance or the
    sweep budget runs out; in the latter case ``report.converged`` is False
    and the partial state is returned.  ``trace`` receives
    ``(sweep, violation, objective, seconds)`` after every sweep (and once
    for the initial state as sweep 0).
    """
    kernels = build_kernels(spec) if kernels is None else list(kernels)
    if len(kernels) != spec.N:
        raise ValueError(f"expected {spec.N} kernels, got {len(kernels)}")
    tol = spec.tolerance if tolerance is None else tolerance
    budget = spec.max_sweeps if max_sweeps is None else max_sweeps
    rhos = [m.weights for m in spec.marginals]
    rng = np.random.default_rng(spec.seed)

    start = time.perf_counter()
    state = initial_state(kernels, spec.representation)

    def record():
        v = constraint_violation(state, rhos)
        j = objective(state)
        state.violation_trace.append(v)
        state.objective_trace.append(j)
        if trace is not None:
            trace(state.sweeps, v, j, time.perf_counter() - start)
        return v

    viol = record()
    while viol >= tol and state.sweeps < budget:
        sweep(state, rhos, spec.order, rng)
        viol = record()

    report = SolveReport(
        converged=bool(viol < tol),
        sweeps=state.sweeps,
        violation=viol,
        violation_trace=list(state.violation_trace),
        objective_trace=list(state.objective_trace),
        seconds=time.perf_counter() - start,
        representation=spec.representation,
        tolerance=tol,
    )
    return state, report


def convergence_rate(violations, burn_in: int = 3):
    """Least-squares fit ``log v_k = c + k log r`` after ``burn_in`` sweeps.

    Returns ``(r, r_squared)``.
    """
    v = np.asarray(violations, dtype=float)[burn_in:]
    v = v[v > 0]
    if v.size < 3:
        raise ValueError("need at least three positive violations after burn-in")
    k = np.arange(v.size, dtype=float)
    y = np.log(v)
    slope, intercept = np.polyfit(k, y, 1)
    resid = y - (slope * k + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(np.exp(slope)), r2
