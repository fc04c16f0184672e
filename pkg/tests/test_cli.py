from __future__ import annotations

import csv
import json
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from mmsb.cli import LOCK_NAME, main, output_lock
from mmsb.errors import MMSBError
from mmsb.phasegrid import read_marginal_csv

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


@pytest.fixture
def example(tmp_path):
    dst = tmp_path / "example"
    shutil.copytree(CONFIGS / "example", dst)
    return dst / "example.ini"


def _set(path: Path, old: str, new: str) -> None:
    text = path.read_text()
    assert old in text
    path.write_text(text.replace(old, new))


def _rows(path: Path):
    with path.open(newline="") as fh:
        return list(csv.reader(fh))


def test_solve_writes_outputs(example, tmp_path):
    out = tmp_path / "out"
    assert main(["solve", "--config", str(example), "--out", str(out), "--trace"]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["converged"] and not summary["partial"]
    assert summary["violation"] < 1e-8
    for i in range(4):
        assert _rows(out / f"mu_{i}.csv")[0] == ["x", "v", "mass"]
        assert len(_rows(out / f"mu_{i}.csv")) == 1 + 16 * 16
    trace = _rows(out / "trace.csv")
    assert trace[0] == ["sweep", "violation", "objective", "seconds"]
    # row 0 is the initial state, then one row per sweep
    assert [int(r[0]) for r in trace[1:]] == list(range(summary["sweeps"] + 1))
    assert not (out / LOCK_NAME).exists()


def test_positional_round_trip(example, tmp_path):
    out = tmp_path / "out"
    main(["solve", "--config", str(example), "--out", str(out)])
    for i in range(4):
        got = read_marginal_csv(out / f"rho_{i}.csv")
        want = read_marginal_csv(example.parent / f"rho{i}.csv")
        assert np.abs(got.weights - want.weights).sum() < 1e-6


def test_outputs_are_deterministic(example, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    main(["solve", "--config", str(example), "--out", str(a)])
    main(["solve", "--config", str(example), "--out", str(b)])
    for name in ("mu_0.csv", "mu_3.csv", "rho_2.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_not_converged_exit_code(example, tmp_path, capsys):
    _set(example, "max_sweeps = 5000", "max_sweeps = 1")
    out = tmp_path / "out"
    assert main(["solve", "--config", str(example), "--out", str(out)]) == 2
    summary = json.loads((out / "summary.json").read_text())
    assert summary["partial"] is True and summary["sweeps"] == 1
    assert "partial" in capsys.readouterr().err


def test_dump_kernels(example, tmp_path):
    _set(example, "directory = out", "directory = out\ndump_kernels = true")
    out = tmp_path / "out"
    main(["solve", "--config", str(example), "--out", str(out)])
    # uniform times: one kernel per interval
    assert sorted(p.name for p in out.glob("kernel*.bin")) == [
        "kernel_0.bin",
        "kernel_1.bin",
        "kernel_2.bin",
    ]


def test_interpolate(example, tmp_path):
    out = tmp_path / "out"
    assert main(["interpolate", "--config", str(example), "--out", str(out), "--times", "0,1.5"]) == 0
    rows = _rows(out / "marginals_t.csv")
    assert rows[0] == ["t", "x", "v", "mass"]
    assert len(rows) == 1 + 2 * 256
    for t in (0.0, 1.5):
        mass = sum(float(r[3]) for r in rows[1:] if float(r[0]) == t)
        assert mass == pytest.approx(1.0, abs=1e-10)
    means = _rows(out / "mean_path.csv")
    assert means[0] == ["t", "mean_x", "mean_v"] and len(means) == 3


def test_interpolate_time_out_of_range(example, tmp_path):
    out = tmp_path / "out"
    assert main(["interpolate", "--config", str(example), "--out", str(out), "--times", "4"]) == 1
    assert not (out / "marginals_t.csv").exists()


def test_sweep_epsilon_small(example, tmp_path, capsys):
    out = tmp_path / "out"
    args = ["sweep-epsilon", "--config", str(example), "--out", str(out), "--values", "0.4,0.2"]
    assert main(args) == 0
    rows = _rows(out / "sweep_epsilon.csv")
    assert rows[0][:5] == ["epsilon", "t", "mean_x", "spline_x", "abs_error"]
    # three intervals, three default probes each
    assert len(rows) == 1 + 2 * 9
    assert {r[0] for r in rows[1:]} == {"0.4", "0.2"}
    assert "abs_error" in capsys.readouterr().out


def test_oracle_spline(tmp_path):
    out = tmp_path / "out"
    assert main(["oracle-spline", "--config", str(CONFIGS / "spline" / "spline.ini"), "--out", str(out)]) == 0
    rows = _rows(out / "spline.csv")
    assert rows[0] == ["t", "S"] and len(rows) == 102
    by_t = {float(t): float(s) for t, s in rows[1:]}
    assert by_t[0.5] == pytest.approx(1.0)
    assert by_t[0.25] == pytest.approx(0.6875)


def test_lock_blocks_second_run(example, tmp_path):
    out = tmp_path / "out"
    with output_lock(out):
        assert main(["solve", "--config", str(example), "--out", str(out)]) == 1
        with pytest.raises(MMSBError):
            with output_lock(out):
                pass
    assert not (out / LOCK_NAME).exists()


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["solve"],
        ["bogus", "--config", "x.ini"],
        ["interpolate", "--config", "x.ini"],
        ["solve", "--config", "/does/not/exist.ini"],
    ],
)
def test_bad_invocations_exit_1(argv):
    try:
        code = main(argv)
    except SystemExit as exc:
        code = exc.code
    assert code == 1


def test_bad_values_exit_1(example, tmp_path):
    out = tmp_path / "out"
    assert main(["sweep-epsilon", "--config", str(example), "--out", str(out), "--values", "0.1,-1"]) == 1


def test_module_entry_point(tmp_path):
    res = subprocess.run(
        [sys.executable, "-m", "mmsb", "--version"], capture_output=True, text=True, check=False
    )
    assert res.returncode == 0 and "mmsb" in res.stdout


@pytest.mark.parametrize("value, code", [("1", 0), ("0", 0), ("many", 1), ("-2", 1)])
def test_thread_env(example, tmp_path, monkeypatch, value, code):
    monkeypatch.setenv("MMSB_THREADS", value)
    assert main(["solve", "--config", str(example), "--out", str(tmp_path / "out")]) == code
