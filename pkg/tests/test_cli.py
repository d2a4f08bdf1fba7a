import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nyv import cli
from nyv.config import ConfigError, ExperimentConfig, load_config, parse_assignments
from nyv.solver import DivergenceError


def run(tmp_path, *args):
    out = tmp_path / "out"
    code = cli.main([*args, "--out", str(out)])
    return code, out


def test_parse_assignments_types_and_comments():
    cfg = parse_assignments(["grid_n = 64  # comment", "", "g_kind = 'step'", "alpha=1.5"])
    assert cfg.grid_n == 64 and cfg.g_kind == "step" and cfg.alpha == 1.5


def test_unknown_key_named():
    with pytest.raises(ConfigError, match="bogus"):
        parse_assignments(["bogus = 1"])
    with pytest.raises(ConfigError):
        parse_assignments(["grid_n = abc"])
    with pytest.raises(ConfigError):
        parse_assignments(["no equals sign"])


@given(st.integers(8, 14), st.floats(0.01, 1.0), st.integers(0, 1000))
def test_text_roundtrip(log_n, T, seed):
    cfg = ExperimentConfig(grid_n=2**log_n, horizon_t=T, seed_base=seed)
    back = parse_assignments(cfg.to_text().splitlines())
    assert back == cfg and back.digest() == cfg.digest()


def test_validation_messages():
    with pytest.raises(ConfigError, match="grid_n"):
        ExperimentConfig(grid_n=100).validate()
    with pytest.raises(ConfigError, match="sigma"):
        ExperimentConfig(sigma=0.9).validate()
    with pytest.raises(ConfigError, match="hurst"):
        ExperimentConfig(hurst=1.5).validate()
    ExperimentConfig(alpha=1.5, hurst=1 / 1.5).validate()


def test_feasibility_command(tmp_path):
    code, out = run(tmp_path, "feasibility", "--set", "vartheta=0.5", "--hurst", "0.25",
                    "--set", "kappa_in=2.5")
    assert code == 0
    m = json.loads((out / "manifest.json").read_text())
    assert m["summary"]["threshold"] == 2.0 and m["summary"]["admissible"] is True
    assert m["artifacts"] == ["config.txt", "feasibility.txt"]
    assert m["seeds"] == {"path": 0, "noise": 1000, "tail": 2000}


def test_simulate_is_reproducible(tmp_path):
    args = ["simulate", "--set", "grid_n=32", "--set", "n_cells=128", "--set", "value_m=128",
            "--set", "g_scale=2", "--set", "horizon_t=0.05", "--set", "n_out=8", "--seed", "3"]
    assert cli.main([*args, "--out", str(tmp_path / "a")]) == 0
    assert cli.main([*args, "--out", str(tmp_path / "b")]) == 0
    for name in ("manifest.json", "solution_manifest.csv", "u_008.nyvf", "diagnostics.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    # replay from the manifest
    assert cli.main(["simulate", "--config", str(tmp_path / "a" / "manifest.json"),
                     "--out", str(tmp_path / "c")]) == 0
    assert (tmp_path / "c" / "u_008.nyvf").read_bytes() == (tmp_path / "a" / "u_008.nyvf").read_bytes()


def test_config_file_and_flags(tmp_path):
    f = tmp_path / "run.cfg"
    f.write_text("samples = 300\nhorizon_t = 1.0\n")
    code, out = run(tmp_path, "lfsm", "--config", str(f), "--alpha", "2", "--hurst", "0.3",
                    "--nt", "65")
    assert code == 0
    m = json.loads((out / "manifest.json").read_text())
    assert m["config"]["alpha"] == 2.0 and m["config"]["n_t"] == 65
    assert m["config"]["samples"] == 300
    assert abs(m["summary"]["quantile_exponent"] - 0.3) < 0.1
    assert load_config(out / "manifest.json").hurst == 0.3


def test_exit_codes(tmp_path, monkeypatch):
    assert run(tmp_path, "simulate", "--set", "bogus=1")[0] == cli.EXIT_CONFIG
    assert run(tmp_path, "simulate", "--set", "sigma=0.95")[0] == cli.EXIT_CONFIG
    assert run(tmp_path, "simulate", "--config", str(tmp_path / "missing.cfg"))[0] == cli.EXIT_IO

    def boom(cfg):
        raise DivergenceError("contraction factor >= 1 twice")
    monkeypatch.setattr(cli.ex, "simulate", boom)
    assert run(tmp_path, "simulate")[0] == cli.EXIT_DIVERGED


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    code = cli.main(["feasibility", "--out", str(blocker / "sub")])
    assert code == cli.EXIT_IO


def test_convergence_command(tmp_path):
    code, out = run(tmp_path, "convergence", "--set", "n_cells=256", "--set", "grid_n=32",
                    "--set", "value_m=128")
    assert code == 0
    rows = (out / "convergence.csv").read_text().splitlines()
    assert rows[0] == "level,increment_norm,cumulative_estimate_norm" and len(rows) == 9


def test_stability_command(tmp_path):
    code, out = run(tmp_path, "stability", "--set", "n_cells=128", "--set", "grid_n=32")
    assert code == 0
    rows = np.loadtxt(out / "stability.csv", delimiter=",", skiprows=1)
    assert rows.shape == (4, 4)
