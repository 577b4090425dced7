import json
import re

import numpy as np
import pytest

from tviskin.calib import read_fit_json
from tviskin.cli import main, validate_config, ConfigError
from tviskin.synth import ScanDataset

MODEL = {"c": 1.0, "lambda": 0.01, "alpha": 2.0, "s_min": 0.01}
LINE = {"kind": "line", "spacing": 6.5, "count": 6}
SMALL = {
    "model": MODEL, "noise": {"sigma_s": 0.01}, "layout": LINE,
    "protocol": {"kind": "line-1d", "extent": 50.0, "positions_count": 101, "depth_steps": 10,
                 "depth_increment": 0.4},
    "train": {"hidden_layers": 1, "width": 8, "iterations": 300, "train_extent": [-16.25, 16.25]},
}


def write(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def test_simulate_default_rows_and_repeatability(tmp_path):
    cfg = write(tmp_path, {"model": MODEL, "noise": {"sigma_s": 0.01}, "layout": LINE})
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "a"), "--seed", "3"]) == 0
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "3"]) == 0
    ds = ScanDataset.load(tmp_path / "a" / "scan.csv")
    assert len(ds) == 100_040
    for name in ("scan.csv", "scan.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_missing_section_names_key(tmp_path, capsys):
    cfg = write(tmp_path, {"model": MODEL, "noise": {"sigma_s": 0.01}})
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    assert "layout" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError, match="gamma"):
        validate_config({"model": {**MODEL, "gamma": 1.0}}, "fit")
    with pytest.raises(ConfigError, match="extra"):
        validate_config({"extra": {}}, "fit")
    with pytest.raises(ConfigError, match="lambda"):
        validate_config({"model": {"alpha": 2.0}}, "fit")
    with pytest.raises(ConfigError):
        validate_config({"noise": {"sigma_s": -1.0}}, "fit")


def test_usage_errors_exit_2(tmp_path):
    assert main(["nonsense"]) == 2
    assert main(["fit", "--out", str(tmp_path / "o")]) == 2
    assert main(["simulate", "--config", str(tmp_path / "missing.json")]) == 2


def test_analyze_alpha_sweep(tmp_path, capsys):
    cfg = write(tmp_path, {
        "model": {"c": 1.0, "lambda": 1.0, "alpha": 2.0}, "noise": {"sigma_s": 0.05},
        "layout": {"kind": "line", "spacing": 1.0, "count": 2},
        "analyze": {"alphas": [0.5, 1.0, 2.0, 3.0, 4.0], "points": 41}})
    out = tmp_path / "an"
    assert main(["analyze", "--config", cfg, "--out", str(out)]) == 0
    listed = capsys.readouterr().out
    assert str(out / "sigma_profile.csv") in listed
    summary = json.loads((out / "analysis.json").read_text())
    assert set(summary["profiles"]) == {"0.5", "1", "2", "3", "4"}
    assert summary["profiles"]["2"]["relative_variation"] < 0.01
    assert summary["profiles"]["3"]["relative_variation"] > 0.1
    rows = np.loadtxt(out / "sigma_profile.csv", delimiter=",", skiprows=1)
    assert len(rows) == 5 * 41
    assert (out / "sigma_profile.svg").read_text().startswith("<svg")


def test_analyze_planar_pair_is_elongated(tmp_path):
    cfg = write(tmp_path, {
        "model": MODEL, "noise": {"sigma_s": 0.01},
        "layout": {"kind": "grid", "spacing": 6.5, "count": [2, 1]}, "analyze": {"grid": 2}})
    out = tmp_path / "an2"
    assert main(["analyze", "--config", cfg, "--out", str(out)]) == 0
    centre = json.loads((out / "analysis.json").read_text())["centre"]
    ratio = centre["transverse_axial_ratio"]
    assert ratio == "inf" or ratio >= 5


def test_empty_layout_exit_2(tmp_path):
    cfg = write(tmp_path, {"model": MODEL, "noise": {"sigma_s": 0.01},
                           "layout": {"kind": "explicit", "positions": []}})
    assert main(["analyze", "--config", cfg, "--out", str(tmp_path / "x")]) == 2


def test_fit_noiseless_round_trip(tmp_path):
    truth = {"c": 0.7, "lambda": 0.03, "alpha": 2.3, "s_min": 0.02}
    cfg = write(tmp_path, {"model": truth, "noise": {"sigma_s": 0.0}, "layout": LINE,
                           "protocol": {"kind": "line-1d", "extent": 50.0, "positions_count": 251,
                                        "depth_steps": 20, "depth_increment": 0.2}})
    out = tmp_path / "fit"
    assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
    assert main(["fit", "--dataset", str(out / "scan.csv"), "--out", str(out)]) == 0
    device, _ = read_fit_json(out / "fit.json")
    assert device.c == pytest.approx(0.7, rel=1e-4)
    assert device.lam == pytest.approx(0.03, rel=1e-4)
    assert device.alpha == pytest.approx(2.3, rel=1e-4)


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    root = tmp_path_factory.mktemp("pipe")
    cfg = write(root, SMALL)
    assert main(["simulate", "--config", cfg, "--out", str(root)]) == 0
    assert main(["train", "--config", cfg, "--dataset", str(root / "scan.csv"),
                 "--out", str(root)]) == 0
    return root, cfg


def test_train_is_idempotent(trained, tmp_path):
    root, cfg = trained
    assert main(["train", "--config", cfg, "--dataset", str(root / "scan.csv"),
                 "--out", str(tmp_path)]) == 0
    for name in ("position.json", "force.json", "loss.csv"):
        assert (root / name).read_bytes() == (tmp_path / name).read_bytes()


def test_evaluate_prints_factors_last(trained, capsys):
    root, _ = trained
    capsys.readouterr()
    assert main(["evaluate", "--dataset", str(root / "scan.csv"), "--weights", str(root),
                 "--out", str(root)]) == 0
    last = capsys.readouterr().out.strip().splitlines()[-1]
    assert re.fullmatch(r"omega_ml=[0-9.e+-]+, omega_theory=[0-9.e+-]+", last)
    doc = json.loads((root / "omega.json").read_text())
    assert doc["method"] == "empirical-ml"
    assert (root / "error_map.csv").exists() and (root / "omega_curve.svg").exists()


def test_evaluate_empty_split(trained, tmp_path, capsys):
    root, _ = trained
    cfg = write(tmp_path, {"evaluate": {"region": [100.0, 200.0]}})
    code = main(["evaluate", "--config", cfg, "--dataset", str(root / "scan.csv"),
                 "--weights", str(root), "--out", str(tmp_path / "ev")])
    assert code == 2
    assert "empty test split" in capsys.readouterr().err
    assert not (tmp_path / "ev").exists()


def test_runtime_failure_exit_3_and_cleanup(tmp_path, capsys):
    # the contact reaches a single taxel, so no trial can pin it down
    cfg = write(tmp_path, {
        "model": {"c": 1.0, "lambda": 1.0, "alpha": 2.0}, "noise": {"sigma_s": 0.01},
        "layout": {"kind": "explicit", "positions": [0.0, 2.0]},
        "oracle": {"position": [-0.2], "force": 0.5, "trials": 50}})
    out = tmp_path / "or"
    assert main(["oracle", "--config", cfg, "--out", str(out)]) == 3
    assert "mc_oracle" in capsys.readouterr().err
    assert not out.exists()


def test_oracle_and_discriminate(tmp_path):
    cfg = write(tmp_path, {
        "model": {"c": 1.0, "lambda": 1.0, "alpha": 2.0}, "noise": {"sigma_s": 0.1},
        "layout": {"kind": "explicit", "positions": [0.0, 2.0]},
        "oracle": {"position": [1.0], "force": 2.0, "trials": 500}})
    assert main(["oracle", "--config", cfg, "--out", str(tmp_path / "o"), "--threads", "2"]) == 0
    res = json.loads((tmp_path / "o" / "oracle.json").read_text())
    assert res["failed"] == 0 and 0.02 < res["sigma_p"] < 0.05
    cfg2 = write(tmp_path, {"model": {**MODEL, "lambda": 0.025}, "layout": LINE,
                            "discriminate": {"forces": [1.2], "step": 3.25}}, "d.json")
    assert main(["discriminate", "--config", cfg2, "--out", str(tmp_path / "d")]) == 0
    summary = json.loads((tmp_path / "d" / "discrimination_summary.json").read_text())
    assert summary["configurations"] == 55 and 0 <= summary["agreement"] <= 1
