import csv
import subprocess
import sys

import pytest

from fptrack.cli import BOUNDS_COLUMNS, CSV_COLUMNS, main


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def run(*argv):
    return main([str(a) for a in argv])


def test_noisy_writes_one_row_per_estimator(tmp_path):
    out = tmp_path / "r.csv"
    assert run("noisy", "--levels", "1000", "--n", "200", "--seed", "42", "--out", out, "--quiet") == 0
    got = rows(out)
    assert [r["estimator"] for r in got] == ["sequential_mmse", "single_observation", "fixed_time"]
    assert all(r["level_or_delay"] == "1000.0" and r["n_trials"] == "200" for r in got)
    assert out.read_text().splitlines()[0] == ",".join(CSV_COLUMNS)


def test_noisy_is_byte_identical_on_rerun(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (a, b):
        assert run("noisy", "--levels", "250,500", "--n", "150", "--seed", "7", "--out", path, "--quiet") == 0
    assert a.read_bytes() == b.read_bytes()


def test_noisy_rejects_zero_noise(tmp_path, capsys):
    assert run("noisy", "--eps", "0", "--levels", "1000", "--out", tmp_path / "x.csv") == 2
    assert "error" in capsys.readouterr().err
    assert not (tmp_path / "x.csv").exists()


def test_noisy_rejects_short_level_for_single_observation(tmp_path):
    assert run("noisy", "--levels", "5", "--n", "10", "--out", tmp_path / "x.csv") == 2


def test_floats_round_trip(tmp_path):
    out = tmp_path / "r.csv"
    run("noisy", "--levels", "500", "--n", "100", "--out", out, "--quiet")
    for r in rows(out):
        for col in ("empirical_moment", "theory_constant", "ratio", "stderr"):
            assert repr(float(r[col])) == r[col]


def test_delayed_rows(tmp_path):
    out = tmp_path / "d.csv"
    assert run("delayed", "--s", "1", "--p", "1", "--delays", "100,200,400", "--ell-rule", "100+sd",
               "--n", "3000", "--seed", "3", "--out", out, "--quiet") == 0
    got = rows(out)
    assert [r["level_or_delay"] for r in got] == ["100.0", "200.0", "400.0"]
    for r in got:
        assert float(r["ratio"]) == pytest.approx(1.0, abs=0.1)


def test_delayed_driftless_is_exact(tmp_path):
    out = tmp_path / "d.csv"
    assert run("delayed", "--s", "0", "--p", "2", "--delays", "5", "--ell", "3", "--cap", "1000000",
               "--n", "200", "--out", out, "--quiet") == 0
    (r,) = rows(out)
    assert float(r["empirical_moment"]) == 25.0 and float(r["stderr"]) == 0.0


def test_delayed_errors(tmp_path):
    assert run("delayed", "--delays", "", "--ell", "100", "--out", tmp_path / "x.csv") == 2
    assert run("delayed", "--s", "0", "--delays", "5", "--ell", "3", "--out", tmp_path / "x.csv") == 2


def test_delayed_warns_on_small_level(tmp_path, capsys):
    assert run("delayed", "--delays", "50", "--ell", "10", "--n", "20", "--out", tmp_path / "x.csv", "--quiet") == 0
    assert "s*d" in capsys.readouterr().err


def test_constants(capsys):
    assert run("constants", "--c1", "--ell", "1000", "--s", "10", "--eps", "0.5", "--p", "1") == 0
    name, value = capsys.readouterr().out.split()
    assert name == "C1" and float(value) == pytest.approx(0.35682, abs=1e-5)
    assert run("constants", "--c2", "--d", "5", "--s", "0", "--p", "2") == 0
    assert capsys.readouterr().out.split() == ["C2_driftless", "25.0"]
    assert run("constants", "--gauss-moment", "--p", "2") == 0
    assert capsys.readouterr().out.split()[1] == "1.0"
    assert run("constants", "--c1", "--ell", "1000") == 2


def test_bounds(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run("bounds", "--z", "0,2,5", "--n", "2000", "--out", a) == 0
    assert run("bounds", "--z", "5,0,2", "--n", "2000", "--out", b) == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().splitlines()[0] == ",".join(BOUNDS_COLUMNS)
    first = rows(a)[0]
    assert float(first["z"]) == 0.0 and float(first["lower_bound"]) == 1.0 and float(first["upper_bound"]) == 1.0


def test_bounds_rejects_z_past_center(tmp_path):
    assert run("bounds", "--z", "0,100", "--n", "10", "--out", tmp_path / "x.csv") == 2


def test_diverge_needs_cap(tmp_path):
    assert run("diverge", "--out", tmp_path / "x.csv") == 2
    out = tmp_path / "v.csv"
    assert run("diverge", "--cap", "10000", "--n-grid", "100,1000", "--out", out) == 0
    assert [r["n"] for r in rows(out)] == ["100", "1000"]


def test_config_file_and_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# sweep\nlevels = 500\nn = 50\nseed = 11\nquiet = true\n")
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run("noisy", "--config", cfg, "--out", a) == 0
    assert {r["n_trials"] for r in rows(a)} == {"50"} and rows(a)[0]["master_seed"] == "11"
    assert run("noisy", "--config", cfg, "--n", "60", "--out", b) == 0
    assert {r["n_trials"] for r in rows(b)} == {"60"}
    cfg.write_text("bogus = 1\n")
    assert run("noisy", "--config", cfg, "--out", a) == 2


def test_seed_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("FPT_SEED", "123")
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run("noisy", "--levels", "500", "--n", "50", "--out", a, "--quiet")
    run("noisy", "--levels", "500", "--n", "50", "--seed", "123", "--out", b, "--quiet")
    assert rows(a)[0]["master_seed"] == "123"
    assert a.read_bytes() == b.read_bytes()
    monkeypatch.setenv("FPT_SEED", "x")
    assert run("noisy", "--levels", "500", "--n", "5", "--out", a) == 2


def test_meta_sidecar(tmp_path):
    out = tmp_path / "r.csv"
    run("noisy", "--levels", "500", "--n", "50", "--seed", "9", "--out", out, "--quiet")
    meta = dict(line.split("=", 1) for line in (tmp_path / "r.csv.meta").read_text().splitlines())
    assert meta["seed"] == "9" and meta["levels"] == "500" and meta["command"] == "noisy"


def test_io_error_exit_code(tmp_path):
    assert run("noisy", "--levels", "500", "--n", "5", "--out", tmp_path / "missing" / "r.csv", "--quiet") == 3


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "fptrack", "constants", "--ft-ratio", "--eps", "0.5", "--p", "1"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert float(proc.stdout.split()[1]) == pytest.approx(5 ** 0.5)
    proc = subprocess.run([sys.executable, "-m", "fptrack", "noisy", "--bogus"], capture_output=True, text=True)
    assert proc.returncode == 2
