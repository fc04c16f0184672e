"""Command line entry point: ``mmsb <command> --config FILE [options]``.

Commands
--------
solve           run the Bregman iteration and write node marginals
interpolate     solve, then write phase-space laws and means at ``--times``
sweep-epsilon   solve once per noise level in ``--values`` and compare mean
                paths with the natural cubic spline through the data means
oracle-spline   sample the natural cubic spline through a ``t,x`` knot file

Exit status is 0 on success, 2 when the solver ran out of sweeps (partial
outputs are still written and flagged in ``summary.json``), 1 otherwise.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bregman import solve
from .config import load_spec, load_spline_config, parse_floats, read_knots_csv
from .errors import MMSBError, NotConverged, ValidationError
from .interpolate import Solution, marginal_at, mean_at
from .kernel import dump_kernel
from .oracle import natural_cubic_spline
from .phasegrid import PositionalMarginal, project_x, write_marginal_csv
from .problem import ProblemSpec, build_kernels

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 2
LOCK_NAME = ".mmsb.lock"


def _fmt(x) -> str:
    # shortest round-trip repr keeps outputs bit-stable and reloadable
    return repr(float(x))


@contextlib.contextmanager
def output_lock(out_dir: Path):
    """Exclusive claim on an output directory for the duration of a run."""
    out_dir.mkdir(parents=True, exist_ok=True)
    lock = out_dir / LOCK_NAME
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise MMSBError(f"{out_dir} is in use by another run (remove {lock} if stale)") from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield out_dir
    finally:
        with contextlib.suppress(FileNotFoundError):
            lock.unlink()


@contextlib.contextmanager
def thread_limit():
    """Cap BLAS threads from ``MMSB_THREADS`` (unset or 0 leaves the default)."""
    raw = os.environ.get("MMSB_THREADS", "").strip()
    try:
        n = int(raw) if raw else 0
    except ValueError:
        raise ValidationError("MMSB_THREADS", f"not an integer: {raw!r}") from None
    if n < 0:
        raise ValidationError("MMSB_THREADS", "must be >= 0")
    if n == 0:
        yield
        return
    from threadpoolctl import threadpool_limits

    with threadpool_limits(limits=n):
        yield


# ---------------------------------------------------------------------------
# writers


def write_measure_csv(path: Path, mu) -> None:
    g = mu.grid
    with path.open("w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["x", "v", "mass"])
        for x, v, m in zip(g.X, g.V, mu.weights):
            out.writerow([_fmt(x), _fmt(v), _fmt(m)])


def _write_rows(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for row in rows:
            out.writerow([r if isinstance(r, str) else _fmt(r) for r in row])


class _TraceWriter:
    def __init__(self, path: Path):
        self.fh = path.open("w", newline="")
        self.out = csv.writer(self.fh, lineterminator="\n")
        self.out.writerow(["sweep", "violation", "objective", "seconds"])

    def __call__(self, sweep, violation, objective, seconds):
        self.out.writerow([sweep, _fmt(violation), _fmt(objective), f"{seconds:.6f}"])
        self.fh.flush()

    def close(self):
        self.fh.close()


def _run_solve(spec: ProblemSpec, out_dir: Path, trace: bool, tag: str = ""):
    kernels = build_kernels(spec)
    if spec.extras.get("dump_kernels"):
        for i, k in enumerate(kernels):
            dump_kernel(out_dir / f"kernel{tag}_{i}.bin", k)
    hook = _TraceWriter(out_dir / f"trace{tag}.csv") if trace else None
    try:
        state, report = solve(spec, kernels=kernels, trace=hook)
    finally:
        if hook is not None:
            hook.close()
    return state, report


def _write_solution(spec: ProblemSpec, state, report, out_dir: Path) -> dict:
    measures = state.node_measures()
    node_errors = []
    for i, mu in enumerate(measures):
        write_measure_csv(out_dir / f"mu_{i}.csv", mu)
        rho = project_x(mu)
        # projections can carry round-off in the last bits; store them normalized
        rho = PositionalMarginal.normalized(rho.x_nodes, rho.weights)
        write_marginal_csv(out_dir / f"rho_{i}.csv", rho)
        node_errors.append(float(np.abs(rho.weights - spec.marginals[i].weights).sum()))
    summary = report.to_dict()
    summary.update(
        partial=not report.converged,
        times=list(spec.times),
        epsilon=spec.epsilon,
        cost_mode=spec.cost_mode.value,
        grid={
            "x_min": float(spec.grid.x_nodes[0]),
            "x_max": float(spec.grid.x_nodes[-1]),
            "n_x": spec.grid.n_x,
            "v_min": float(spec.grid.v_nodes[0]),
            "v_max": float(spec.grid.v_nodes[-1]),
            "n_v": spec.grid.n_v,
        },
        positional_l1=node_errors,
    )
    return summary


def _dump_json(path: Path, data: dict) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _status(report) -> int:
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


def _warn_partial(report) -> None:
    print(
        f"mmsb: not converged after {report.sweeps} sweeps "
        f"(violation {report.violation:.3e}); outputs are partial",
        file=sys.stderr,
    )


# ---------------------------------------------------------------------------
# commands


def cmd_solve(spec: ProblemSpec, out_dir: Path, trace: bool) -> int:
    state, report = _run_solve(spec, out_dir, trace)
    summary = _write_solution(spec, state, report, out_dir)
    _dump_json(out_dir / "summary.json", summary)
    print(
        f"{'converged' if report.converged else 'NOT converged'}: "
        f"{report.sweeps} sweeps, violation {report.violation:.3e}, "
        f"{report.seconds:.2f} s -> {out_dir}"
    )
    if not report.converged:
        _warn_partial(report)
    return _status(report)


def cmd_interpolate(spec: ProblemSpec, out_dir: Path, trace: bool, times) -> int:
    if not times:
        raise ValidationError("times", "interpolate needs --times t1,t2,...")
    state, report = _run_solve(spec, out_dir, trace)
    summary = _write_solution(spec, state, report, out_dir)
    sol = Solution(state, spec)
    # validate every time before writing anything
    for t in times:
        sol.locate(t)
    long_rows, mean_rows = [], []
    for t in times:
        mu = marginal_at(t, sol)
        g = mu.grid
        long_rows.extend((t, x, v, m) for x, v, m in zip(g.X, g.V, mu.weights))
        mean_rows.append((t, *mean_at(t, sol)))
    _write_rows(out_dir / "marginals_t.csv", ["t", "x", "v", "mass"], long_rows)
    _write_rows(out_dir / "mean_path.csv", ["t", "mean_x", "mean_v"], mean_rows)
    summary["interpolation_times"] = list(times)
    _dump_json(out_dir / "summary.json", summary)
    for t, mx, mv in mean_rows:
        print(f"t={t:g}  mean_x={mx:.6f}  mean_v={mv:.6f}")
    if not report.converged:
        _warn_partial(report)
    return _status(report)


def default_probe_times(spec: ProblemSpec) -> tuple[float, ...]:
    out = []
    for a, b in zip(spec.times, spec.times[1:]):
        out.extend((a + 0.25 * (b - a), a + 0.5 * (b - a), a + 0.75 * (b - a)))
    return tuple(out)


def cmd_sweep_epsilon(spec: ProblemSpec, out_dir: Path, trace: bool, values) -> int:
    if not values:
        raise ValidationError("values", "sweep-epsilon needs --values e1,e2,...")
    if any(not e > 0 for e in values):
        raise ValidationError("values", "noise levels must be positive")
    probes = spec.extras.get("probe_times") or default_probe_times(spec)
    knots_x = [m.mean_var()[0] for m in spec.marginals]
    spline = natural_cubic_spline(spec.times, knots_x)
    rows, runs = [], []
    status = EXIT_OK
    for k, eps in enumerate(values):
        sub = spec.replace(epsilon=float(eps))
        state, report = _run_solve(sub, out_dir, trace, tag=f"_eps{k}")
        sol = Solution(state, sub)
        for t in probes:
            mx, mv = mean_at(t, sol)
            sx = spline(t)
            rows.append((eps, t, mx, sx, abs(mx - sx), mv, spline.derivative(t)))
        runs.append({"epsilon": float(eps), **report.to_dict()})
        if not report.converged:
            _warn_partial(report)
            status = EXIT_NOT_CONVERGED
    header = ["epsilon", "t", "mean_x", "spline_x", "abs_error", "mean_v", "spline_v"]
    _write_rows(out_dir / "sweep_epsilon.csv", header, rows)
    _dump_json(out_dir / "summary.json", {"runs": runs, "probe_times": list(probes)})
    print(f"{'epsilon':>10} {'t':>8} {'mean_x':>12} {'spline_x':>12} {'abs_error':>12}")
    for eps, t, mx, sx, err, _, _ in rows:
        print(f"{eps:>10g} {t:>8g} {mx:>12.6f} {sx:>12.6f} {err:>12.3e}")
    return status


def cmd_oracle_spline(config: Path, out_override: Path | None) -> int:
    sc = load_spline_config(config)
    t, x = read_knots_csv(sc.knots_path)
    spline = natural_cubic_spline(t, x)
    out_dir = out_override or sc.output_dir or Path("out")
    with output_lock(out_dir):
        ts = np.linspace(t[0], t[-1], sc.samples)
        _write_rows(out_dir / "spline.csv", ["t", "S"], zip(ts, spline(ts)))
    print(f"wrote {sc.samples} samples to {out_dir / 'spline.csv'}")
    return EXIT_OK


def run(
    spec: ProblemSpec,
    command: str,
    out_dir: Path | None = None,
    *,
    trace: bool | None = None,
    times=None,
    values=None,
) -> int:
    """Execute ``command`` on a loaded spec and return the exit status."""
    out_dir = Path(out_dir or spec.output_dir or "out")
    trace = spec.trace if trace is None else (trace or spec.trace)
    with thread_limit(), output_lock(out_dir):
        if command == "solve":
            return cmd_solve(spec, out_dir, trace)
        if command == "interpolate":
            return cmd_interpolate(spec, out_dir, trace, times)
        if command == "sweep-epsilon":
            return cmd_sweep_epsilon(spec, out_dir, trace, values)
    raise ValueError(f"unknown command {command!r}")


class _Parser(argparse.ArgumentParser):
    # usage errors are hard errors (1); 2 is reserved for non-convergence
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, type=Path, metavar="PATH")
    common.add_argument("--out", type=Path, metavar="DIR", help="output directory")
    common.add_argument("--trace", action="store_true", help="write trace.csv per sweep")

    p = _Parser(prog="mmsb", description="Multi-marginal phase-space Schroedinger bridges.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("solve", parents=[common], help="solve and write node marginals")
    ip = sub.add_parser("interpolate", parents=[common], help="laws and means at given times")
    ip.add_argument("--times", required=True, metavar="T1,T2,...")
    sp = sub.add_parser("sweep-epsilon", parents=[common], help="compare mean paths with the spline")
    sp.add_argument("--values", required=True, metavar="E1,E2,...")
    sub.add_parser("oracle-spline", parents=[common], help="sample the natural cubic spline")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "oracle-spline":
            return cmd_oracle_spline(args.config, args.out)
        spec = load_spec(args.config)
        times = parse_floats(args.times, "times") if getattr(args, "times", None) else None
        values = parse_floats(args.values, "values") if getattr(args, "values", None) else None
        return run(spec, args.command, args.out, trace=args.trace, times=times, values=values)
    except NotConverged as exc:
        print(f"mmsb: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except (MMSBError, OSError) as exc:
        print(f"mmsb: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
