import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

import cramer_ldp.cumulant
from cramer_ldp.cli import DEFAULT_SEED, RunConfig, main, parse_grid, read_config_file, resolve_config
from cramer_ldp.errors import UsageError


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def read_csv(text):
    return list(csv.DictReader(io.StringIO(text)))


# rate


def test_rate_table_continuous(capsys):
    code, out, _ = run(capsys, "rate", "--dist", "exp:1", "--rate", "1", "--u-grid", "0:4:0.05")
    assert code == 0
    rows = read_csv(out)
    assert len(rows) == 81
    assert list(rows[0]) == ["u", "I", "lambda_star", "branch"]
    assert rows[0]["branch"] == "ZeroAtom" and rows[0]["lambda_star"] == "" and float(rows[0]["I"]) == 1.0
    last = rows[-1]
    assert float(last["u"]) == 4.0
    assert f"{float(last['I']):.6f}" == "1.000000"
    assert float(last["lambda_star"]) == pytest.approx(0.5, abs=1e-12)


def test_rate_single_point(capsys):
    code, out, _ = run(capsys, "rate", "--dist", "exp:1", "--rate", "1", "--u-grid", "1:1:1")
    rows = read_csv(out)
    assert code == 0 and len(rows) == 1
    assert abs(float(rows[0]["I"])) < 1e-15


def test_rate_discrete(capsys):
    code, out, _ = run(capsys, "rate", "--discrete", "--dist", "exp:1", "--u-grid", "0.5:3:0.5")
    rows = read_csv(out)
    assert code == 0 and [float(r["u"]) for r in rows] == [0.5, 1.0, 1.5, 2.0, 2.5, 3.0]
    assert float(rows[3]["I"]) == pytest.approx(0.306853, abs=1e-6)


def test_rate_closed_form_column(capsys):
    code, out, _ = run(capsys, "rate", "--dist", "exp:2", "--rate", "0.5", "--u-grid", "0.1:3:0.1", "--closed-form")
    rows = read_csv(out)
    assert code == 0 and "I_closed_form" in rows[0]
    for r in rows:
        assert float(r["I"]) == pytest.approx(float(r["I_closed_form"]), abs=1e-8)
    code, out, err = run(capsys, "rate", "--dist", "gamma:2:1", "--rate", "1", "--u-grid", "1:2:1", "--closed-form")
    assert code == 0 and "I_closed_form" not in out and "exponential" in err


def test_rate_json_format(capsys):
    code, out, _ = run(capsys, "rate", "--discrete", "--dist", "exp:1", "--u-grid", "0:1:1", "--format", "json")
    records = json.loads(out)
    assert code == 0 and records[0]["I"] == "inf" and records[0]["branch"] == "Infinite"
    assert records[1]["I"] == pytest.approx(0.0, abs=1e-15)


def test_csv_round_trips_at_17_digits(tmp_path, capsys):
    path = tmp_path / "rate.csv"
    assert main(["rate", "--dist", "gamma:1.7:0.3", "--rate", "2.3", "--u-grid", "0.1:5:0.7", "--out", str(path)]) == 0
    rows = read_csv(path.read_text())
    from cramer_ldp.cumulant import CompoundPoissonModel
    from cramer_ldp.marks import Gamma
    from cramer_ldp.rate import rate_function

    model = CompoundPoissonModel(2.3, Gamma(1.7, 0.3))
    for r in rows:
        res = rate_function(model, float(r["u"]))
        assert float(r["I"]) == res.value
        assert float(r["lambda_star"]) == res.lambda_star


# simulate


def test_simulate_point_mass(tmp_path, capsys):
    path = tmp_path / "paths.csv"
    code, out, _ = run(capsys, "simulate", "--dist", "point:1", "--rate", "1", "--t", "10", "--paths", "1",
                       "--seed", "7", "--out", str(path))
    assert code == 0
    rows = read_csv(path.read_text())
    assert all(float(r["xi"]) == 1.0 for r in rows)
    summary = dict(kv.split("=") for kv in out.split())
    assert float(summary["mean_s_t"]) == len(rows) / 10
    assert float(summary["mean_jump_count"]) == len(rows)


def test_simulate_summary_jump_count(capsys):
    code, out, err = run(capsys, "simulate", "--dist", "exp:1", "--rate", "1", "--t", "100", "--paths", "1000",
                         "--seed", "1")
    assert code == 0
    assert out.startswith("path_id,tau,xi\n")
    summary = dict(kv.split("=") for kv in err.split())
    assert abs(float(summary["mean_jump_count"]) - 100.0) <= 4 * math.sqrt(100.0 / 1000)
    data = np.loadtxt(io.StringIO(out), delimiter=",", skiprows=1)
    assert data.shape[0] == round(float(summary["mean_jump_count"]) * 1000)


def test_simulate_dump_round_trips(tmp_path):
    path = tmp_path / "paths.csv"
    assert main(["simulate", "--dist", "gamma:0.7:1.3", "--rate", "2", "--t", "3", "--paths", "20",
                 "--seed", "4", "--out", str(path)]) == 0
    from cramer_ldp.cumulant import CompoundPoissonModel
    from cramer_ldp.marks import Gamma
    from cramer_ldp.simulate import simulate_paths

    batch = simulate_paths(CompoundPoissonModel(2.0, Gamma(0.7, 1.3)), 3.0, 20, seed=4)
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    np.testing.assert_array_equal(data[:, 1], batch.times)
    np.testing.assert_array_equal(data[:, 2], batch.marks)


# estimate


def test_estimate_zero(capsys):
    code, out, _ = run(capsys, "estimate", "--method", "zero", "--dist", "exp:1", "--rate", "1", "--t", "5")
    rec = json.loads(out)
    assert code == 0
    assert rec["p_hat"] == math.exp(-5) and rec["std_err"] == 0 and rec["method"] == "Exact"


def test_estimate_is(capsys):
    code, out, _ = run(capsys, "estimate", "--method", "is", "--u", "4", "--delta", "0.1", "--t", "50",
                       "--paths", "100000", "--dist", "exp:1", "--rate", "1", "--seed", "3")
    rec = json.loads(out)
    assert code == 0 and 0.90 <= rec["log_decay"] <= 1.10
    assert list(rec) == ["method", "u", "delta", "t", "n", "seed", "p_hat", "std_err", "log_decay"]


def test_estimate_mc_certain_event(capsys):
    code, out, _ = run(capsys, "estimate", "--method", "mc", "--u", "1", "--delta", "100", "--t", "1",
                       "--paths", "10", "--dist", "exp:1", "--rate", "1")
    rec = json.loads(out)
    assert code == 0 and rec["p_hat"] == 1 and rec["seed"] == DEFAULT_SEED


def test_estimate_other_methods(capsys):
    code, out, _ = run(capsys, "estimate", "--method", "chernoff", "--j", "10", "--t", "1", "--dist", "exp:1",
                       "--rate", "1")
    assert code == 0 and json.loads(out)["bound"] == pytest.approx(math.exp(-4), rel=1e-12)
    code, out, _ = run(capsys, "estimate", "--method", "laplace", "--lam", "0.3", "--t", "2", "--paths", "20000",
                       "--dist", "exp:1", "--rate", "1")
    rec = json.loads(out)
    assert code == 0 and abs(rec["mean"] - rec["exact"]) <= 4 * rec["std_err"]
    code, out, _ = run(capsys, "estimate", "--method", "decay", "--u", "4", "--delta", "0.1", "--t-grid", "10,20",
                       "--paths", "5000", "--dist", "exp:1", "--rate", "1")
    rows = read_csv(out)
    assert code == 0 and [float(r["t"]) for r in rows] == [10.0, 20.0]
    code, out, _ = run(capsys, "estimate", "--method", "mc", "--j", "3", "--t", "1", "--paths", "1000",
                       "--dist", "exp:1", "--rate", "1", "--format", "csv")
    assert code == 0 and out.splitlines()[0].startswith("method,")


# exit codes


@pytest.mark.parametrize(
    "argv",
    [
        ["rate", "--dist", "weibull:1", "--rate", "1", "--u-grid", "0:1:0.5"],
        ["rate", "--dist", "exp:1", "--rate", "1", "--u-grid", "-1:1:0.5"],
        ["rate", "--dist", "exp:1", "--rate", "0", "--u-grid", "0:1:0.5"],
        ["rate", "--dist", "exp:1", "--u-grid", "0:1:0.5"],
        ["estimate", "--method", "laplace", "--lam", "0.6", "--t", "1", "--paths", "10", "--dist", "exp:1",
         "--rate", "1"],
        ["estimate", "--method", "bogus"],
        ["simulate", "--dist", "exp:1", "--rate", "1", "--t", "1", "--paths", "0"],
        ["nope"],
    ],
)
def test_usage_errors_exit_2(argv, capsys):
    code, out, _ = run(capsys, *argv)
    assert code == 2 and out == ""


def test_usage_error_names_offending_token(capsys):
    _, _, err = run(capsys, "rate", "--dist", "gamma:2:oops", "--rate", "1", "--u-grid", "0:1:1")
    assert "oops" in err


def test_numeric_error_exit_3(monkeypatch, capsys):
    from cramer_ldp import rate as rt

    monkeypatch.setattr(rt, "DEFAULT_CONFIG", rt.SolverConfig(max_iter=1))
    monkeypatch.setattr(rt.rate_function, "__defaults__", (rt.SolverConfig(max_iter=1),))
    code, _, err = run(capsys, "rate", "--dist", "gamma:2.7:0.9", "--rate", "1.3", "--u-grid", "7.3:7.3:1")
    assert code == 3 and "numeric error" in err


def test_failed_command_leaves_no_output_file(tmp_path, capsys):
    path = tmp_path / "never.csv"
    code, _, _ = run(capsys, "rate", "--dist", "exp:1", "--rate", "-1", "--u-grid", "0:1:1", "--out", str(path))
    assert code == 2 and not path.exists()


# config


def test_config_precedence(tmp_path, capsys):
    cfg_path = tmp_path / "run.cfg"
    cfg_path.write_text("# comment\ndist=exp:1\nrate=2\nu-grid=0:2:1\nseed=5\n")
    cfg = resolve_config(["rate", "--config", str(cfg_path), "--rate", "1"])
    assert cfg.rate == 1.0 and cfg.dist == "exp:1" and cfg.u_grid == "0:2:1" and cfg.seed == 5
    assert resolve_config(["rate", "--dist", "exp:1"]).seed == DEFAULT_SEED
    code, out, _ = run(capsys, "rate", "--config", str(cfg_path), "--rate", "1")
    assert code == 0 and float(read_csv(out)[0]["I"]) == 1.0


def test_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("dist exp:1\n")
    assert run(capsys, "rate", "--config", str(bad))[0] == 2
    bad.write_text("colour=blue\n")
    assert run(capsys, "rate", "--config", str(bad))[0] == 2
    bad.write_text("rate=fast\n")
    assert run(capsys, "rate", "--config", str(bad))[0] == 2
    assert run(capsys, "rate", "--config", str(tmp_path / "missing.cfg"))[0] == 2


def test_run_config_round_trip(tmp_path):
    original = RunConfig(command="estimate", dist="zeroinf:0.3:gamma:2:0.5", rate=0.1 + 0.2, t=50.0, paths=1000,
                         seed=9, method="is", u=4.0, delta=0.1, optimal=True, workers=3, format="json")
    path = tmp_path / "rt.cfg"
    path.write_text(original.to_text())
    again = RunConfig.from_mapping(read_config_file(path))
    again.command = original.command
    assert again == original


def test_parse_grid():
    np.testing.assert_allclose(parse_grid("0:4:0.05"), 0.05 * np.arange(81), atol=1e-12)
    assert parse_grid("0:4:0.05")[-1] == 4.0
    np.testing.assert_array_equal(parse_grid("1:1:1"), [1.0])
    np.testing.assert_array_equal(parse_grid("0:1:0.3"), [0.0, 0.3, 0.6, 0.8999999999999999])
    for bad in ("0:1", "a:1:1", "0:1:0", "2:1:1", "-1:1:1"):
        with pytest.raises(UsageError):
            parse_grid(bad)


# determinism


DETERMINISM_COMMANDS = [
    ["rate", "--dist", "zeroinf:0.2:exp:1", "--rate", "1.5", "--u-grid", "0:3:0.25"],
    ["simulate", "--dist", "gamma:2:0.5", "--rate", "3", "--t", "2", "--paths", "3000", "--seed", "11"],
    ["estimate", "--method", "mc", "--u", "1.2", "--delta", "0.2", "--t", "3", "--paths", "5000",
     "--dist", "exp:1", "--rate", "1", "--seed", "2"],
    ["estimate", "--method", "is", "--u", "3", "--delta", "0.1", "--t", "20", "--paths", "5000",
     "--dist", "exp:1", "--rate", "1", "--seed", "2"],
    ["estimate", "--method", "laplace", "--lam", "0.2", "--t", "2", "--paths", "5000",
     "--dist", "exp:1", "--rate", "1", "--seed", "2"],
    ["estimate", "--method", "decay", "--u", "3", "--delta", "0.1", "--t-grid", "5,10", "--paths", "3000",
     "--dist", "exp:1", "--rate", "1", "--seed", "2"],
]


@pytest.mark.parametrize("argv", DETERMINISM_COMMANDS, ids=lambda a: " ".join(a[:3]))
def test_outputs_byte_identical_across_runs_and_workers(argv, tmp_path):
    outputs = []
    for i, workers in enumerate([1, 1, 2, 8]):
        path = tmp_path / f"out{i}"
        assert main([*argv, "--workers", str(workers), "--out", str(path)]) == 0
        outputs.append(path.read_bytes())
    assert len(outputs[0]) > 0
    assert all(o == outputs[0] for o in outputs)


# validate


def test_validate_passes_and_reports_closed_form_line(tmp_path):
    path = tmp_path / "report.txt"
    assert main(["validate", "--out", str(path)]) == 0
    lines = path.read_text().splitlines()
    assert all(line.startswith("PASS") for line in lines[:-1])
    closed = [line for line in lines if "closed-form I^c" in line]
    assert len(closed) == 1 and "tol=1e-08" in closed[0]
    for line in lines[:-1]:
        assert "target=" in line and "observed=" in line and "tol=" in line


def test_validate_catches_injected_sign_error(monkeypatch, tmp_path):
    original = cramer_ldp.cumulant.cumulant
    monkeypatch.setattr(cramer_ldp.cumulant, "cumulant", lambda model, lam: -original(model, lam))
    path = tmp_path / "report.txt"
    assert main(["validate", "--paths", "20000", "--out", str(path)]) != 0
    assert "FAIL" in path.read_text()


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "cramer_ldp", "rate", "--dist", "exp:1", "--rate", "1", "--u-grid", "4:4:1"],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0
    assert read_csv(proc.stdout)[0]["I"] == "1"
