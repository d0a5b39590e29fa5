import csv
import json
import math
import shutil
from pathlib import Path

import pytest

from twomode_ion.cli import EXIT_CONFIG, EXIT_FLAG, EXIT_NUMERICAL, EXIT_OK, main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
HALF_PI = math.pi / 2


def _write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg) if isinstance(cfg, dict) else cfg)
    return str(path)


def _run(command, config, out, *extra):
    return main([command, "--config", str(config), "--out", str(out), *extra])


def _read_json(path):
    return json.loads(Path(path).read_text())


def _direct(**overrides):
    cfg = {"direct": {"gamma": 22, "eta": 0.2, "trap_ratio": 5}, "target": {"k_a": 1, "k_b": 1},
           "alpha": 1.0, "cutoff": 8}
    cfg.update(overrides)
    return cfg


@pytest.fixture(scope="module")
def rotate22(tmp_path_factory):
    out = tmp_path_factory.mktemp("rotate22")
    assert _run("rotate", CONFIGS / "rotation_gamma22.json", out) == EXIT_OK
    return out


class TestExitCodes:
    def test_compile_lab_bundle(self, tmp_path, capsys):
        assert _run("compile", CONFIGS / "lab_bundle.json", tmp_path) == EXIT_OK
        report = _read_json(tmp_path / "compile.json")
        assert report["flags"] == []
        assert report["min_trap_ratio"] == 5
        assert report["g13"]["arg"] == pytest.approx(report["g13"]["required_arg"])
        assert report["delta13"]["hz"] == pytest.approx(-44e6)
        assert report["timescales"]["t_spont"]["seconds"] == pytest.approx(200e-6, rel=0.01)
        assert json.loads(capsys.readouterr().out) == report

    def test_low_trap_ratio_flagged(self, tmp_path):
        assert _run("compile", CONFIGS / "trap_ratio_2.json", tmp_path) == EXIT_FLAG
        assert "trap_ratio_below_minimum" in _read_json(tmp_path / "compile.json")["flags"]

    @pytest.mark.parametrize("cfg", [
        {"raman": {"g13_hz": 5e5, "delta12_hz": 12e9, "eta12": 0.2, "eta23": 0.2}},
        {"raman": {"g13_hz": 5e5, "delta12_hz": 12e9, "eta12": 0.2, "eta23": 0.2},
         "direct": {"gamma": 22, "eta": 0.2}},
        {"direct": {"gamma": 22, "eta": 0.2}, "trap": {"nu_a_hz": 5, "nu_b_hz": 1}},
        {"direct": {"gamma": -1.0}},
        {"direct": {"gamma": 22}, "alpha": "big"},
        {"direct": {"gamma": 22}, "propagation": {"method": "euler"}},
        "{not json",
        "[1, 2]",
    ])
    def test_config_errors(self, tmp_path, cfg, capsys):
        assert _run("compile", _write(tmp_path, cfg), tmp_path) == EXIT_CONFIG
        assert "config error" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert _run("limits", tmp_path / "nope.json", tmp_path) == EXIT_CONFIG

    def test_numerical_failure(self, tmp_path, capsys):
        cfg = _direct(propagation={"cutoff_leak_tol": 1e-9, "n_samples": 5, "gt_max": 0.05})
        assert _run("rotate", _write(tmp_path, cfg), tmp_path) == EXIT_NUMERICAL
        assert "numerical failure" in capsys.readouterr().err

    def test_rotate_needs_rotation_target(self, tmp_path):
        cfg = _direct(target={"k_a": 3, "k_b": 1})
        assert _run("rotate", _write(tmp_path, cfg), tmp_path) == EXIT_CONFIG


class TestRotate:
    def test_outputs(self, rotate22):
        names = sorted(p.name for p in rotate22.iterdir())
        assert names == ["full.csv", "ideal.csv", "resonant.csv", "summary.json"]
        with open(rotate22 / "full.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["gt", "delta", "norm_defect", "leak_population"]
        assert len(rows) == 601

    def test_summary(self, rotate22):
        summary = _read_json(rotate22 / "summary.json")
        assert summary["peak_delta"] >= 0.985
        assert abs(summary["peak_gt"] - 1.02 * HALF_PI) <= 0.05 * 1.02 * HALF_PI
        assert summary["norm_defect"] < 1e-9
        assert summary["t_rot"]["gt"] == pytest.approx(HALF_PI)

    def test_byte_identical(self, rotate22, tmp_path):
        assert _run("rotate", CONFIGS / "rotation_gamma22.json", tmp_path) == EXIT_OK
        for name in ("full.csv", "resonant.csv", "ideal.csv", "summary.json"):
            assert (tmp_path / name).read_bytes() == (rotate22 / name).read_bytes()

    def test_vacuum(self, tmp_path):
        cfg = _direct(alpha=0.0, propagation={"n_samples": 100})
        assert _run("rotate", _write(tmp_path, cfg), tmp_path, "--cutoff", "2") == EXIT_OK
        summary = _read_json(tmp_path / "summary.json")
        assert summary["cutoff"] == 2
        assert summary["peak_delta"] == pytest.approx(1.0, abs=1e-6)

    def test_low_gamma_modulation(self, rotate22, tmp_path):
        assert _run("rotate", CONFIGS / "rotation_gamma2p75.json", tmp_path) == EXIT_OK
        low = _read_json(tmp_path / "summary.json")["full"]["modulation"]
        high = _read_json(rotate22 / "summary.json")["full"]["modulation"]
        assert low >= 5 * high


class TestOtherCommands:
    def test_sweep(self, tmp_path):
        cfg = _direct(sweep={"gammas": [2.75, 5.5, 11, 22], "gamma_eta2": 0.88}, alpha=0.3,
                      propagation={"n_samples": 20, "gt_max": 0.3})
        assert _run("sweep", _write(tmp_path, cfg), tmp_path / "out", "--cutoff", "4", "--threads", "2") == EXIT_OK
        out = tmp_path / "out"
        manifest = _read_json(out / "manifest.json")
        files = sorted(p.name for p in out.glob("*.csv"))
        assert len(files) == 8
        assert [run["gamma"] for run in manifest["runs"]] == [2.75, 5.5, 11, 22]
        assert "gamma_22_cutoff_4_full.csv" in files and "gamma_2.75_cutoff_4_resonant.csv" in files

    def test_resonances(self, tmp_path):
        assert _run("resonances", CONFIGS / "rotation_gamma22.json", tmp_path) == EXIT_OK
        with open(tmp_path / "resonances.csv") as fh:
            rows = {int(r["N"]): r for r in csv.DictReader(fh)}
        row = rows[1]
        assert (row["m"], row["mu"], row["nu"], row["n"]) == ("0", "0", "4", "0")
        assert float(row["ratio"]) == pytest.approx(0.04 / 24, rel=1e-9)
        assert all(r["flagged"] == "0" for r in rows.values())

    def test_resonances_flag(self, tmp_path):
        assert _run("resonances", CONFIGS / "trap_ratio_2.json", tmp_path) == EXIT_FLAG

    def test_limits(self, tmp_path):
        assert _run("limits", CONFIGS / "lab_bundle.json", tmp_path) == EXIT_OK
        report = _read_json(tmp_path / "limits.json")
        assert report["gamma_ratio"] == pytest.approx(22.0)
        assert 11e-6 <= report["t_rot"] <= 14e-6
        assert report["characteristic_state"] == [4, 4]

    def test_validate_needs_lasers(self, tmp_path):
        assert _run("validate-adiabatic", CONFIGS / "rotation_gamma22.json", tmp_path) == EXIT_CONFIG

    @pytest.mark.parametrize("scale, code", [(1.0, EXIT_FLAG), (0.5, EXIT_OK)])
    def test_validate_adiabatic(self, tmp_path, scale, code):
        cfg = json.loads((CONFIGS / "lab_bundle.json").read_text())
        cfg["validation"].update({"elimination_scale": scale, "n_samples": 100})
        assert _run("validate-adiabatic", _write(tmp_path, cfg), tmp_path) == code
        summary = _read_json(tmp_path / "validation.json")
        assert summary["fidelity_ok"] == (scale == 0.5)
        assert summary["excited_ok"]


def test_console_script_installed():
    assert shutil.which("twomode-ion") is not None
