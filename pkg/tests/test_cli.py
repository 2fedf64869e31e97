import json
import subprocess
import sys

import numpy as np
import pytest
from numpy.testing import assert_allclose

from longrun import (
    CriterionParams,
    OptimizerConfig,
    Strategy,
    load_model,
    moments,
    optimize,
    reference_model,
    simulate_discrete,
    write_timeseries_csv,
)
from longrun.cli import main


@pytest.fixture()
def model_file(tmp_path):
    out = tmp_path / "cal"
    rc = main(["calibrate", "--from-tables", "--out", str(out)])
    assert rc == 0
    return str(out / "model.json")


def test_calibrate_from_tables(tmp_path, capsys):
    out = tmp_path / "cal"
    assert main(["calibrate", "--from-tables", "--out", str(out)]) == 0
    assert "model.json" in capsys.readouterr().out
    model = load_model(out / "model.json")
    assert_allclose(model.B[0, 0], -0.021, rtol=1e-12)
    report = json.loads((out / "report.json").read_text())
    assert report["discrete"]["nobs"] == 371
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "calibrate"
    assert "--out" not in manifest["argv"]
    assert set(manifest["outputs"]) == {"model.json", "report.json"}


def test_calibrate_csv_input(tmp_path):
    data = simulate_discrete(reference_model(), 600, seed=2)
    csv_path = tmp_path / "input.csv"
    write_timeseries_csv(csv_path, data)
    out = tmp_path / "cal"
    assert main(["calibrate", str(csv_path), "--out", str(out)]) == 0
    model = load_model(out / "model.json")
    assert model.m == 1 and model.n == 1
    manifest = json.loads((out / "manifest.json").read_text())
    assert str(csv_path) in manifest["inputs"]


def test_calibrate_bad_csv_exit_2(tmp_path, capsys):
    csv_path = tmp_path / "bad.csv"
    csv_path.write_text("date,excess_return_1\n1990-01,0.1\n")
    rc = main(["calibrate", str(csv_path), "--out", str(tmp_path / "o")])
    assert rc == 2
    assert "factor_1" in capsys.readouterr().err


def test_calibrate_needs_source(tmp_path, capsys):
    rc = main(["calibrate", "--out", str(tmp_path / "o")])
    assert rc == 1


def test_unknown_verb_exit_1(capsys):
    assert main(["frobnicate"]) == 1


def test_no_arguments_exit_1(capsys):
    assert main([]) == 1


def test_moments_stdout(model_file, capsys):
    rc = main(["moments", "--model", model_file, "--h", "1", "--H", "0"])
    assert rc == 0
    out = capsys.readouterr().out
    lines = dict(line.split(" ", 1) for line in out.strip().splitlines())
    mom = moments(load_model(model_file), Strategy(h=np.ones(1), H=np.zeros((1, 1))))
    assert_allclose(float(lines["growth_rate"]), mom.growth_rate, rtol=1e-12)
    assert_allclose(float(lines["variance_rate"]), mom.variance_rate, rtol=1e-12)
    cov = json.loads(lines["wealth_factor_cov"])
    assert_allclose(cov, mom.wealth_factor_cov, rtol=1e-12)
    # same ballpark as the bundled-constants model
    assert_allclose(float(lines["growth_rate"]), 0.01895, rtol=1e-3)


def test_moments_json_output(model_file, tmp_path, capsys):
    out = tmp_path / "mom"
    rc = main(["moments", "--model", model_file, "--h", "0.5", "--H", "-1",
               "--out", str(out)])
    assert rc == 0
    doc = json.loads((out / "moments.json").read_text())
    mom = moments(load_model(model_file),
                  Strategy(h=np.array([0.5]), H=np.array([[-1.0]])))
    assert_allclose(doc["growth_rate"], mom.growth_rate, rtol=1e-12)
    assert_allclose(doc["second_moment_slope"][0][0], mom.second_moment_slope[0, 0],
                    rtol=1e-12)
    assert doc["strategy"]["H"] == [[-1.0]]


def test_moments_check_runs_mc(model_file, capsys):
    rc = main(["moments", "--model", model_file, "--check", "--dt", "0.5",
               "--horizon", "200", "--paths", "512", "--seed", "1"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "check growth_rate:" in out
    assert "z=" in out


def test_moments_bad_vector_exit_1(model_file, capsys):
    rc = main(["moments", "--model", model_file, "--h", "1,2"])
    assert rc == 1
    assert "--h" in capsys.readouterr().err


def test_missing_model_file_exit_2(tmp_path, capsys):
    rc = main(["moments", "--model", str(tmp_path / "nope.json")])
    assert rc == 2


def test_sweep_H_csv(model_file, tmp_path):
    out = tmp_path / "sw"
    rc = main(["sweep", "--model", model_file, "--mode", "H", "--h", "1",
               "--range=-1:1:5", "--out", str(out)])
    assert rc == 0
    lines = (out / "sweep.csv").read_text().strip().splitlines()
    assert lines[0] == "H,K,P,varRate"
    assert len(lines) == 6
    grid = [float(row.split(",")[0]) for row in lines[1:]]
    assert_allclose(grid, [-1.0, -0.5, 0.0, 0.5, 1.0])


def test_sweep_theta_csv_and_svg(model_file, tmp_path):
    out = tmp_path / "sw"
    rc = main(["sweep", "--model", model_file, "--mode", "theta",
               "--range", "0.5:8:4", "--log", "--svg", "--out", str(out)])
    assert rc == 0
    lines = (out / "sweep.csv").read_text().strip().splitlines()
    assert lines[0] == "parameter,h,H,W,ratio"
    assert len(lines) == 5
    w = [float(row.split(",")[3]) for row in lines[1:]]
    assert all(a >= b for a, b in zip(w, w[1:]))
    svg = (out / "sweep.svg").read_text()
    assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")


def test_sweep_gamma_csv(model_file, tmp_path):
    out = tmp_path / "sw"
    rc = main(["sweep", "--model", model_file, "--mode", "gamma",
               "--theta", "1", "--range", "0:0.01:3", "--out", str(out)])
    assert rc == 0
    lines = (out / "sweep.csv").read_text().strip().splitlines()
    h = [float(row.split(",")[1]) for row in lines[1:]]
    assert h[-1] < h[0]


def test_manifest_replay_is_byte_identical(model_file, tmp_path):
    first = tmp_path / "run1"
    argv = ["sweep", "--model", model_file, "--mode", "theta",
            "--range", "0.5:2:3"]
    assert main(argv + ["--out", str(first)]) == 0
    manifest = json.loads((first / "manifest.json").read_text())
    second = tmp_path / "run2"
    assert main(manifest["argv"] + ["--out", str(second)]) == 0
    assert (first / "sweep.csv").read_bytes() == (second / "sweep.csv").read_bytes()
    assert (first / "manifest.json").read_bytes() == (second / "manifest.json").read_bytes()


def test_simulate_stats_deterministic(model_file, capsys):
    argv = ["simulate", "--model", model_file, "--dt", "0.5", "--horizon", "50",
            "--paths", "128", "--seed", "7"]
    assert main(argv) == 0
    first = capsys.readouterr().out
    assert main(argv) == 0
    second = capsys.readouterr().out
    assert first == second
    doc = json.loads(first)
    assert doc["config"]["paths"] == 128
    assert np.isfinite(doc["mean_u"])


def test_simulate_without_out_writes_nothing(model_file, tmp_path, capsys, monkeypatch):
    monkeypatch.chdir(tmp_path)
    rc = main(["simulate", "--model", model_file, "--dt", "0.5", "--horizon", "20",
               "--paths", "16"])
    assert rc == 0
    assert not (tmp_path / "stats.json").exists()
    assert not (tmp_path / "manifest.json").exists()


def test_simulate_dump_paths_needs_out(model_file, capsys):
    rc = main(["simulate", "--model", model_file, "--dump-paths"])
    assert rc == 1
    assert "--out" in capsys.readouterr().err


def test_simulate_dump_paths(model_file, tmp_path, capsys):
    out = tmp_path / "sim"
    rc = main(["simulate", "--model", model_file, "--dt", "0.5", "--horizon", "20",
               "--paths", "16", "--dump-paths", "--out", str(out)])
    assert rc == 0
    lines = (out / "paths.csv").read_text().strip().splitlines()
    assert lines[0] == "path,T,u,x_1"
    assert len(lines) == 17


def test_simulate_discrete_series(model_file, tmp_path, capsys):
    out = tmp_path / "sim"
    rc = main(["simulate", "--model", model_file, "--discrete", "48",
               "--seed", "3", "--out", str(out)])
    assert rc == 0
    lines = (out / "series.csv").read_text().strip().splitlines()
    assert lines[0] == "date,excess_return_1,factor_1"
    assert len(lines) == 49


def test_simulate_discrete_too_short_exit_1(model_file, capsys):
    rc = main(["simulate", "--model", model_file, "--discrete", "12"])
    assert rc == 1


def test_optimize_json(model_file, tmp_path, capsys):
    out = tmp_path / "opt"
    rc = main(["optimize", "--model", model_file, "--theta", "1",
               "--grid-points", "31", "--out", str(out)])
    assert rc == 0
    doc = json.loads((out / "optimum.json").read_text())
    ref = optimize(load_model(model_file),
                   CriterionParams(theta=1.0, gamma=np.zeros(1)),
                   OptimizerConfig(grid_points=31))
    assert_allclose(doc["h"][0], ref.strategy.h[0], rtol=1e-12)
    assert_allclose(doc["H"][0][0], ref.strategy.H[0, 0], rtol=1e-12)
    assert_allclose(doc["value"], ref.value, rtol=1e-12)
    # close to the optimum of the bundled-constants model
    assert_allclose(doc["h"][0], 0.1026, atol=5e-3)
    assert_allclose(doc["H"][0][0], -0.1296, atol=5e-3)
    assert doc["stationary"] is True


def test_optimize_unbounded_exit_3(model_file, capsys):
    rc = main(["optimize", "--model", model_file, "--theta", "0",
               "--gamma", "0.05", "--grid-points", "21"])
    assert rc == 3
    assert "without bound" in capsys.readouterr().err


def test_optimize_bad_bounds_exit_1(model_file, capsys):
    rc = main(["optimize", "--model", model_file, "--grid-bounds", "5"])
    assert rc == 1
    assert "grid-bounds" in capsys.readouterr().err


def test_console_script_help():
    proc = subprocess.run([sys.executable, "-m", "longrun.cli", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    for verb in ("calibrate", "moments", "sweep", "simulate", "optimize"):
        assert verb in proc.stdout
