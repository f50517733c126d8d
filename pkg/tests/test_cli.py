import csv
import json
import os
import subprocess
import sys

import pytest

from kvdamp import cli


def run(args, cwd, env=None):
    full_env = dict(os.environ, **(env or {}))
    return subprocess.run([sys.executable, "-m", "kvdamp.cli", *args], cwd=cwd, capture_output=True, text=True, env=full_env)


def header(path):
    with open(path) as fh:
        return next(csv.reader(fh))


SMALL = {
    "bessel-zeros": ["--n-max", "4"],
    "dn-map": ["--m-max", "4"],
    "quasimode": ["--n", "4:8:2"],
    "resolvent-scan": ["--lambda", "50:52:2", "--node-floor", "2000"],
    "evolve": ["--n", "4", "--T", "1"],
    "decay": ["--T", "2", "--nodes", "200"],
    "rays": ["--grid", "8"],
}


@pytest.mark.parametrize("cmd", sorted(SMALL))
def test_csv_schema(cmd, tmp_path):
    out = tmp_path / "out.csv"
    res = run([cmd, *SMALL[cmd], "--out", str(out)], tmp_path)
    assert res.returncode == 0, res.stderr
    assert header(out) == cli.COLUMNS[cmd]
    status = json.loads(res.stdout)
    assert status["status"] == "ok" and status["command"] == cmd


def test_same_config_byte_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["resolvent-scan", "--lambda", "50:54:2", "--node-floor", "2000"]
    assert run([*args, "--out", str(a)], tmp_path).returncode == 0
    assert run([*args, "--out", str(b)], tmp_path, env={cli.THREADS_ENV: "3"}).returncode == 0
    assert a.read_bytes() == b.read_bytes()


def test_print_config_round_trip(tmp_path):
    res = run(["quasimode", "--alpha", "8", "--n", "4:12:4", "--print-config"], tmp_path)
    cfg = json.loads(res.stdout)
    assert cfg["n"] == "4:12:4" and cfg["cutoff_width"] == 0.3
    path = tmp_path / "cfg.json"
    path.write_text(res.stdout)
    again = run(["quasimode", "--config", str(path), "--print-config"], tmp_path)
    assert json.loads(again.stdout) == cfg
    loaded = cli.load_config("quasimode", str(path))
    assert loaded == cli.QuasimodeConfig(n="4:12:4")


def test_config_runs_equivalently(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"alpha": 8, "n_max": 6, "out": "z1.csv"}))
    assert run(["bessel-zeros", "--config", str(path)], tmp_path).returncode == 0
    assert run(["bessel-zeros", "--n-max", "6", "--out", "z2.csv"], tmp_path).returncode == 0
    assert (tmp_path / "z1.csv").read_bytes() == (tmp_path / "z2.csv").read_bytes()


def test_unknown_config_key_rejected(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"alpha": 8, "bogus": 1}))
    res = run(["bessel-zeros", "--config", str(path)], tmp_path)
    assert res.returncode == 1
    err = json.loads(res.stderr)
    assert err["status"] == "error" and "bogus" in err["message"]


def test_bad_values_give_error_json(tmp_path):
    res = run(["quasimode", "--n", "9:2"], tmp_path)
    assert res.returncode == 1 and json.loads(res.stderr)["error"] == "ValueError"
    res = run(["bessel-zeros", "--n-max", "3"], tmp_path, env={cli.THREADS_ENV: "zero"})
    assert res.returncode == 0  # bessel-zeros does not use the pool
    res = run(["dn-map", "--m-max", "2"], tmp_path, env={cli.THREADS_ENV: "zero"})
    assert res.returncode == 1 and cli.THREADS_ENV in json.loads(res.stderr)["message"]


def test_type_checked_config(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"n_max": 2.5}))
    res = run(["bessel-zeros", "--config", str(path)], tmp_path)
    assert res.returncode == 1


def test_quasimode_summary_has_fits(tmp_path):
    res = run(["quasimode", "--n", "4:40:6", "--out", "qm.csv"], tmp_path)
    assert res.returncode == 0, res.stderr
    summ = json.loads((tmp_path / "qm.json").read_text())
    fit = summ["fits"]["norm_F_vs_lambda"]
    assert abs(fit["slope"] + 1) <= 0.15
    assert fit["ci_low"] < fit["slope"] < fit["ci_high"]


def test_spectrum_json(tmp_path):
    res = run(["spectrum", "--m", "32", "--shift-imag", "51.8", "--count", "4", "--nodes", "4000"], tmp_path)
    assert res.returncode == 0, res.stderr
    doc = json.loads((tmp_path / "spec.json").read_text())
    assert len(doc["eigenvalues"]) == 4 and doc["max_real"] < 0


def test_rays_classification(tmp_path):
    assert run(["rays", "--grid", "8"], tmp_path).returncode == 0
    with open(tmp_path / "rays.csv") as fh:
        rows = list(csv.DictReader(fh))
    kinds = {r["classification"] for r in rows}
    assert kinds <= {"hyperbolic", "damped-start"}
    assert max(float(r["time"]) for r in rows) <= 4.0


def test_report_subset(tmp_path):
    res = run(["report", "--criteria", "7,12", "--out", "rep.json"], tmp_path)
    assert res.returncode == 0, res.stderr
    doc = json.loads((tmp_path / "rep.json").read_text())
    assert set(doc["criteria"]) == {"criterion_07", "criterion_12"}
    assert doc["all_passed"] is True


def test_parse_range():
    assert cli.parse_range("4:10:3") == [4, 7, 10]
    assert cli.parse_range("1,5,9") == [1, 5, 9]
    assert cli.parse_range("40:41:0.5", integer=False) == [40.0, 40.5, 41.0]
    with pytest.raises(ValueError):
        cli.parse_range("1:2:3:4")


def test_console_entry_point(tmp_path):
    res = subprocess.run(["kvdamp", "rays", "--print-config"], capture_output=True, text=True, cwd=tmp_path)
    assert res.returncode == 0 and json.loads(res.stdout)["grid"] == 64
