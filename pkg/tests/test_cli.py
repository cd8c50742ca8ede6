import os

import numpy as np
import pytest

from thinfilm import cli, grid, io_store
from thinfilm.grid import Field, Grid

RUN_CONFIG = """\
nx=128
n_exponent=2
init=droplet
init.width=0.5
t_end=2e-9
snapshot_every=5e-10
sweep.r_min=0.0625
sweep.r_max=0.125
sweep.lambda=1.25
"""


def _write(path, text):
    path.write_text(text)
    return str(path)


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    base = tmp_path_factory.mktemp("run")
    cfg = _write(base / "c.cfg", RUN_CONFIG)
    out = base / "out"
    assert cli.main(["run", "--config", cfg, "--out", str(out)]) == cli.EXIT_OK
    return out


def test_run_writes_snapshots_and_table(run_dir):
    snaps = sorted(p.name for p in run_dir.glob("snap_*.tflm"))
    assert snaps == [io_store.snapshot_name(k) for k in range(5)]
    head, rows = io_store.read_csv(run_dir / "diagnostics.csv")
    assert head == io_store.diagnostics_header(4) and len(rows) == 5
    assert {r[head.index("class_r0")] for r in rows} <= {"Good", "Bad"}


def test_run_is_thread_count_independent(run_dir, tmp_path, monkeypatch):
    monkeypatch.setenv("TFLM_THREADS", "3")
    cfg = _write(tmp_path / "c.cfg", RUN_CONFIG)
    assert cli.main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "diagnostics.csv").read_bytes() == (run_dir / "diagnostics.csv").read_bytes()


@pytest.mark.parametrize("text", [
    "nx=64\nsweep.r_max=1.0",
    "bogus=1",
    "n_exponent=3.5\nstrict_regime=true",
    "nx=64\nsweep.r_min=0.125\nsweep.r_max=0.25\nsweep.lambda=2",
])
def test_run_config_errors_exit_3(tmp_path, text, capsys):
    assert cli.main(["run", "--config", _write(tmp_path / "c.cfg", text), "--out", str(tmp_path / "o")]) == 3
    assert "config error" in capsys.readouterr().err


def test_run_missing_config_exit_1(tmp_path):
    assert cli.main(["run", "--config", str(tmp_path / "none.cfg"), "--out", str(tmp_path / "o")]) == 1


def test_run_divergence_exit_2(tmp_path, capsys):
    text = "nx=16\ninit=random\ndt_safety=3\nt_end=1e-3\nsnapshot_every=1e-4\n"
    assert cli.main(["run", "--config", _write(tmp_path / "c.cfg", text), "--out", str(tmp_path / "o")]) == 2
    assert "diverged" in capsys.readouterr().err


def test_diagnose_outputs_and_errors(run_dir, tmp_path, capsys):
    snap = str(run_dir / io_store.snapshot_name(0))
    assert cli.main(["diagnose", "--snapshot", snap, "--all"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "check,component,value"
    checks = {line.split(",")[0] for line in out[1:]}
    assert {"energy", "bernis_gruen", "smoothed_averages", "tilt_excess", "poincare_grad_annulus",
            "third_derivative", "second_derivative", "entropy"} <= checks
    target = tmp_path / "d.csv"
    assert cli.main(["diagnose", "--snapshot", snap, "--radius", "0.1", "--center", "0.4,0.5",
                     "--out", str(target)]) == 0
    assert target.read_text().startswith("check,component,value\n")
    assert cli.main(["diagnose", "--snapshot", snap, "--radius", "0.01"]) == 4
    assert "minimum resolvable radius 0.0625" in capsys.readouterr().err
    bad = tmp_path / "bad.tflm"
    bad.write_bytes(b"NOPE" + b"\0" * 40)
    assert cli.main(["diagnose", "--snapshot", str(bad)]) == 1


def test_sweep_then_fit(run_dir, tmp_path, capsys):
    out = tmp_path / "sweep.csv"
    args = ["sweep", "--traj", str(run_dir), "--center", "0.75,0.55", "--rmin", "0.0625",
            "--rmax", "0.125", "--lambda", "1.25", "--out", str(out)]
    assert cli.main(args) == 0
    head, rows = io_store.read_csv(out)
    assert head == ["t", "level", "r", "excess", "class"] and len(rows) == 20
    assert cli.main(["fit", "--csv", str(out)]) in (0, 5)
    assert cli.main(args[:-4] + ["--rmax", "0.5", "--out", str(out)]) == 4
    assert cli.main(["sweep", "--traj", str(tmp_path), "--center", "0.5,0.5", "--rmin", "0.1",
                     "--rmax", "0.2", "--out", str(out)]) == 1
    capsys.readouterr()


def test_fit_reports(tmp_path, capsys):
    good = tmp_path / "g.csv"
    good.write_text("r,excess\n" + "".join(f"{r},{2 * r ** 3}\n" for r in (0.1, 0.2, 0.4, 0.8)))
    assert cli.main(["fit", "--csv", str(good), "--p", "6"]) == 0
    msg = capsys.readouterr().out
    assert "beta=3.000000" in msg and "min(beta,gamma)=1.333333" in msg
    zero = tmp_path / "z.csv"
    zero.write_text("t,r,excess\n0,0.1,0\n0,0.2,0\n0,0.4,0\n")
    assert cli.main(["fit", "--csv", str(zero)]) == 0
    assert "super-polynomial" in capsys.readouterr().out
    few = tmp_path / "f.csv"
    few.write_text("r,excess\n0.1,1\n0.2,2\n")
    assert cli.main(["fit", "--csv", str(few)]) == 5
    assert cli.main(["fit", "--csv", str(good), "--p", "2"]) == 3
    assert cli.main(["fit", "--csv", str(tmp_path / "missing.csv")]) == 1


def test_validate_passes(capsys):
    assert cli.main(["validate"]) == 0
    out = capsys.readouterr().out
    assert "convergence/laplacian" in out and "FAIL" not in out


def test_validate_detects_broken_stencil(monkeypatch, capsys):
    monkeypatch.setattr(grid, "_dx", lambda a, h: (np.roll(a, -1, -1) - a) / h)
    assert cli.main(["validate"]) == 1
    assert "failing checks:" in capsys.readouterr().out


def test_validate_unwritable_tmpdir(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert cli.main(["validate", "--tmpdir", str(blocker / "sub")]) == 1
    out = capsys.readouterr().out
    assert "roundtrip/snapshot" in out and "IoFailure" in out


def test_snapshot_n_exponent_default(tmp_path, capsys):
    g = Grid.square(64)
    f = Field(g, 1.0 + 0.1 * np.sin(2 * np.pi * g.coords()[0]))
    p = tmp_path / "s.tflm"
    io_store.write_snapshot(f, p)  # n unknown (NaN) -> diagnose falls back to n = 2
    assert cli.main(["diagnose", "--snapshot", str(p)]) == 0
    assert os.path.exists(p)
    capsys.readouterr()
