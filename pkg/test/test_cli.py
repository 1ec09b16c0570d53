# -*- coding: utf-8 -*-
"""
测试命令行入口：sample / estimate / oracle / scan / init-config
"""

import json
import math

import pytest

import main
from src.cli.commands import render_report
from src.cli.run_config import (
    RunConfig,
    build_run_config,
    load_run_config_file,
    state_from_provenance,
)
from src.core.config_manager import ConfigManager
from src.core.errors import ConfigError, DualOptError


@pytest.fixture
def run_cli(config_path):
    """以临时配置文件运行命令行，返回退出码"""

    def run(command, *rest):
        return main.run([command, "--config-file", config_path, *rest])

    return run


def _sample(run_cli, path, *extra):
    return run_cli("sample", "--output", str(path), *extra)


def _read_json(path):
    with open(path, encoding="utf-8") as f:
        return json.load(f)


def test_sample_writes_shot_file(run_cli, tmp_path):
    path = tmp_path / "shots.txt"
    assert _sample(run_cli, path, "--qubits", "2", "--shots", "3", "--seed", "7") == 0
    lines = path.read_text(encoding="utf-8").splitlines()
    body = [line for line in lines if not line.startswith("#")]
    assert len(body) == 3 and all(len(line) == 2 for line in body)
    assert "#seed=7" in lines and "#state=zero" in lines


def test_sample_tfim_header_and_determinism(run_cli, tmp_path):
    """相同参数重复运行得到逐字节相同的文件"""
    args = ["--qubits", "6", "--state", "tfim", "--steps", "2", "--shots", "5000", "--seed", "1"]
    first, second = tmp_path / "a.txt", tmp_path / "b.txt"
    assert _sample(run_cli, first, *args) == 0
    assert _sample(run_cli, second, *args, "--workers", "2") == 0
    assert first.read_bytes() == second.read_bytes()
    assert "#state=tfim:J=0.5236,h=1.0,dt=0.1,steps=2" in first.read_text(encoding="utf-8")


def test_estimate_identity_observable(run_cli, tmp_path):
    shots, report = tmp_path / "shots.txt", tmp_path / "report.json"
    _sample(run_cli, shots, "--qubits", "2", "--shots", "400", "--seed", "2")
    code = run_cli("estimate", str(shots), "--obs", "II", "--output", str(report))
    assert code == 0
    entry = _read_json(report)["observables"][0]
    assert entry["canonical"]["mean"] == 1.0
    assert entry["canonical"]["std_error"] == 0.0
    assert entry["optimized"]["combined"]["mean"] == 1.0


def test_estimate_without_optimizer(run_cli, tmp_path):
    shots, report = tmp_path / "shots.txt", tmp_path / "report.json"
    _sample(run_cli, shots, "--qubits", "1", "--shots", "20000", "--seed", "3")
    assert run_cli("estimate", str(shots), "--no-optimize", "--output", str(report)) == 0
    document = _read_json(report)
    entry = document["observables"][0]
    assert document["schema_version"] == 1
    assert document["optimizer"] is None
    assert "optimized" not in entry
    assert abs(entry["canonical"]["mean"] - 1.0) < 5 * math.sqrt(2 / 20000)
    # exact value derived from the zero-state provenance
    assert entry["truth"] == 1.0
    assert entry["canonical"]["abs_error"] == pytest.approx(abs(entry["canonical"]["mean"] - 1))


def test_estimate_report_deterministic_with_duals(run_cli, tmp_path):
    shots = tmp_path / "shots.txt"
    _sample(run_cli, shots, "--qubits", "3", "--shots", "3000", "--seed", "4")
    reports = [tmp_path / "r1.json", tmp_path / "r2.json"]
    for report in reports:
        code = run_cli(
            "estimate", str(shots), "--obs", "ZZZ", "--obs", "0.5*XII+ZZI",
            "--sweeps", "4", "--duals-dir", str(tmp_path / "duals"), "--output", str(report),
        )
        assert code == 0
    assert reports[0].read_bytes() == reports[1].read_bytes()
    document = _read_json(reports[0])
    assert len(document["observables"]) == 2
    directions = document["observables"][0]["optimized"]["directions"]
    assert {d["selection"] for d in directions} <= {"optimized", "canonical"}
    assert directions[0]["sweeps"]["records"][0]["sweep"] == 0
    assert (tmp_path / "duals" / "obs0_A.json").exists()

    oracle_report = tmp_path / "oracle.json"
    code = run_cli(
        "oracle", "--qubits", "3", "--obs", "ZZZ",
        "--duals", str(tmp_path / "duals" / "obs0_A.json"), "--output", str(oracle_report),
    )
    assert code == 0
    entry = _read_json(oracle_report)["observables"][0]
    assert entry["supplied"]["mean"] == pytest.approx(1.0)
    assert entry["supplied"]["variance"] <= entry["canonical"]["variance"]


@pytest.mark.parametrize(
    "n_qubits, obs, mean, variance",
    [(3, "ZZZ", 1.0, 26.0), (1, "Z", 1.0, 2.0), (1, "I", 1.0, 0.0)],
)
def test_oracle_values(run_cli, tmp_path, n_qubits, obs, mean, variance):
    report = tmp_path / "oracle.json"
    code = run_cli(
        "oracle", "--qubits", str(n_qubits), "--obs", obs, "--output", str(report)
    )
    assert code == 0
    entry = _read_json(report)["observables"][0]
    assert entry["expectation"] == pytest.approx(mean)
    assert entry["canonical"]["mean"] == pytest.approx(mean)
    assert entry["canonical"]["variance"] == pytest.approx(variance, abs=1e-9)


def test_oracle_tfim_and_cap(run_cli, tmp_path):
    report = tmp_path / "oracle.json"
    code = run_cli(
        "oracle", "--qubits", "3", "--state", "tfim", "--steps", "1", "--output", str(report)
    )
    assert code == 0
    entry = _read_json(report)["observables"][0]
    assert entry["canonical"]["mean"] == pytest.approx(entry["expectation"], abs=1e-10)
    assert run_cli("oracle", "--qubits", "9") == 1


def test_scan_small(run_cli, tmp_path):
    report = tmp_path / "scan.json"
    code = run_cli(
        "scan", "--qubits", "2", "--max-steps", "1", "--repetitions", "2",
        "--shots", "2000", "--sweeps", "3", "--output", str(report),
    )
    assert code == 0
    document = _read_json(report)
    assert [step["step"] for step in document["steps"]] == [0, 1]
    for step in document["steps"]:
        entry = step["observables"][0]
        assert entry["selected_never_worse"]
        for key in ("canonical_sigma", "canonical_error", "optimized_sigma", "optimized_error"):
            assert entry[f"{key}_std"] >= 0.0
    # two repetitions of the Trotter state give different sigma estimates
    assert document["steps"][1]["observables"][0]["canonical_sigma_std"] > 0.0


def test_malformed_shot_file_exit_code(run_cli, tmp_path):
    shots = tmp_path / "shots.txt"
    _sample(run_cli, shots, "--qubits", "2", "--shots", "3", "--seed", "7")
    text = shots.read_text(encoding="utf-8")
    shots.write_text(text[:-3] + "9\n", encoding="utf-8")
    assert run_cli("estimate", str(shots)) == 1


def test_observable_size_mismatch(run_cli, tmp_path):
    shots = tmp_path / "shots.txt"
    _sample(run_cli, shots, "--qubits", "2", "--shots", "10", "--seed", "7")
    assert run_cli("estimate", str(shots), "--obs", "ZZZ") == 1


def test_unknown_run_config_key(run_cli, tmp_path):
    """未知的运行配置键返回退出码 2"""
    config = tmp_path / "run.json"
    config.write_text(json.dumps({"qubits": 2, "shotz": 10}), encoding="utf-8")
    with pytest.raises(ConfigError):
        load_run_config_file(str(config))
    assert run_cli("sample", "--config", str(config)) == 2


def test_run_config_file_values(run_cli, tmp_path):
    config = tmp_path / "run.json"
    shots = tmp_path / "shots.txt"
    config.write_text(
        json.dumps({"qubits": 2, "shots": 5, "seed": 9, "output": str(shots)}),
        encoding="utf-8",
    )
    assert run_cli("sample", "--config", str(config), "--shots", "4") == 0
    body = [ln for ln in shots.read_text(encoding="utf-8").splitlines() if ln[0] != "#"]
    assert len(body) == 4


def test_init_config(run_cli, config_path):
    assert run_cli("init-config") == 0
    with open(config_path, encoding="utf-8") as f:
        assert "[OPTIMIZER]" in f.read()


def test_init_config_settings_reach_run_config(run_cli, config_path):
    """init-config --set 写入的值经 build_run_config 生效，命令行参数仍然优先"""
    code = run_cli(
        "init-config", "--set", "OPTIMIZER.n_sweeps=7", "--set", "optimizer.inner_solver=lstsq"
    )
    assert code == 0
    manager = ConfigManager(config_path)
    args = main.build_parser().parse_args(
        ["estimate", "shots.txt", "--config-file", config_path, "--split-seed", "5"]
    )
    run = build_run_config("estimate", args, manager)
    assert run.optimizer.n_sweeps == 7
    assert run.optimizer.inner_solver == "lstsq"
    assert run.optimizer.rng_seed == 5
    assert run_cli("init-config", "--set", "OPTIMIZER.no_such_key=1") == 2
    assert run_cli("init-config", "--set", "n_sweeps") == 2


def test_truth_for_default_observable(run_cli, tmp_path):
    """不给 --obs 时默认可观测量 Z...Z 也接受一个 --truth"""
    shots, report = tmp_path / "shots.txt", tmp_path / "report.json"
    _sample(run_cli, shots, "--qubits", "2", "--shots", "400", "--seed", "6")
    code = run_cli(
        "estimate", str(shots), "--no-optimize", "--truth", "1.0", "--output", str(report)
    )
    assert code == 0
    entry = _read_json(report)["observables"][0]
    assert entry["observable"] == "ZZ"
    assert entry["truth"] == 1.0
    assert run_cli("estimate", str(shots), "--truth", "1.0", "--truth", "0.5") == 2


def test_run_config_validation():
    with pytest.raises(ConfigError):
        RunConfig(command="sample", shots=0)
    with pytest.raises(ConfigError):
        RunConfig(command="sample", state="ghz")
    with pytest.raises(ConfigError):
        RunConfig(command="oracle").require_qubits()


def test_state_from_provenance():
    state = state_from_provenance("tfim:J=0.5236,h=1.0,dt=0.1,steps=1", 3, cap=14)
    assert state is not None and state.n_qubits == 3
    assert state_from_provenance("zero", 20, cap=14) is None
    assert state_from_provenance("unknown", 2, cap=14) is None


def test_report_rejects_non_finite():
    with pytest.raises(DualOptError):
        render_report({"mean": float("nan")})
