import json

import pytest

from taplab.cli import load_config, main

CFG = """
n = 50
replicates = 1
delta_grid = 1.0
max_iters = 1000
grad_tol = 1e-8
"""


@pytest.fixture()
def cfg_file(tmp_path):
    path = tmp_path / "cfg.txt"
    path.write_text(CFG)
    return str(path)


def run(cfg_file, out, *argv):
    return main(["--config", cfg_file, "--out", str(out), *argv])


def test_load_config_parsing(tmp_path):
    path = tmp_path / "c.txt"
    path.write_text("n = 10  # comment\nsigma = 0.5\ndelta_grid = 0.6, 1.0\n"
                    "design = rademacher\n")
    cfg = load_config(path)
    assert cfg == {"n": 10, "sigma": 0.5, "delta_grid": (0.6, 1.0),
                   "design": "rademacher"}


def test_unknown_config_key_rejected(tmp_path):
    path = tmp_path / "c.txt"
    path.write_text("bogus = 1\n")
    with pytest.raises(SystemExit):
        main(["--config", str(path), "potential"])


def test_potential_subcommand(cfg_file, tmp_path, capsys):
    assert run(cfg_file, tmp_path, "potential", "--delta", "1.0") == 0
    lines = (tmp_path / "potential.csv").read_text().splitlines()
    assert lines[0] == "# tap-lab v1"
    assert lines[1] == "gamma,phi,phi_prime,phi_second"
    summary = json.loads((tmp_path / "potential_summary.json").read_text())
    assert set(summary) == {"gamma_stat", "gamma_alg", "regime"}
    assert json.loads((tmp_path / "manifest.json").read_text())["command"] == "potential"


def test_amp_subcommand(cfg_file, tmp_path):
    assert run(cfg_file, tmp_path, "amp", "--iters", "4") == 0
    lines = (tmp_path / "amp.csv").read_text().splitlines()
    assert lines[1] == "k,gamma_k,mse_empirical,mse_se,grad_norm_sq_per_p"
    assert len(lines) == 2 + 4


def test_ngd_subcommand(cfg_file, tmp_path):
    assert run(cfg_file, tmp_path, "ngd") == 0
    lines = (tmp_path / "ngd.csv").read_text().splitlines()
    assert lines[1] == "k,f_value,grad_norm_sq_per_p,step"
    state = json.loads((tmp_path / "ngd_state.json").read_text())
    assert set(state) == {"m", "s", "lambda", "gamma"}
    assert len(state["m"]) == 50


def test_mse_sweep_subcommand(cfg_file, tmp_path):
    assert run(cfg_file, tmp_path, "mse-sweep") == 0
    lines = (tmp_path / "mse_sweep.csv").read_text().splitlines()
    assert lines[1].startswith("delta,seed,mse_tap,mse_mf")
    assert len(lines) == 3  # header x2 + 1 row


def test_calibrate_subcommand(cfg_file, tmp_path):
    assert run(cfg_file, tmp_path, "calibrate") == 0
    for meth in ("tap", "mf"):
        lines = (tmp_path / f"calibration_{meth}.csv").read_text().splitlines()
        assert lines[1] == "bin_lo,bin_hi,pip_mean,freq_nonzero,count"
        assert len(lines) == 12


def test_hessian_subcommand(cfg_file, tmp_path, capsys):
    assert run(cfg_file, tmp_path, "hessian", "--method", "dense") == 0
    report = json.loads((tmp_path / "hessian.json").read_text())
    assert set(report) == {"min_eig", "method", "iterations"}
    assert report["method"] == "dense"


def test_oracle_gaussian_subcommand(cfg_file, tmp_path):
    assert run(cfg_file, tmp_path, "oracle", "--mode", "gaussian") == 0
    report = json.loads((tmp_path / "oracle.json").read_text())
    assert "log_evidence" in report and "v_star" in report


def test_oracle_enumerate_subcommand(tmp_path):
    cfg = tmp_path / "tiny.txt"
    cfg.write_text("n = 6\nreplicates = 1\n")
    assert main(["--config", str(cfg), "--out", str(tmp_path),
                 "oracle", "--mode", "enumerate"]) == 0
    report = json.loads((tmp_path / "oracle.json").read_text())
    assert len(report["marginal_m"]) == 6


def test_seed_flag_changes_data(cfg_file, tmp_path):
    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    main(["--config", cfg_file, "--out", str(out1), "--seed", "1", "mse-sweep"])
    main(["--config", cfg_file, "--out", str(out2), "--seed", "2", "mse-sweep"])
    r1 = (out1 / "mse_sweep.csv").read_text()
    r2 = (out2 / "mse_sweep.csv").read_text()
    assert r1 != r2
