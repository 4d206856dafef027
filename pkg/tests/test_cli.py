import csv
import json

import numpy as np
import pytest
import yaml

from klmcnot import cli, oracle, states
from klmcnot.errors import ValidationError


def read_rows(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# klmcnot ")
    return lines[0], list(csv.DictReader(lines[1:]))


def test_fidelity_curve(tmp_path, capsys):
    assert cli.main(["fidelity-curve", "--out", str(tmp_path), "--seed", "5", "--oracle"]) == 0
    header, rows = read_rows(tmp_path / "fidelity_curve.csv")
    assert "seed=5" in header
    by_v = {float(r["V"]): r for r in rows}
    assert float(by_v[1.0]["F_model"]) == 1.0 and float(by_v[1.0]["F_werner"]) == 1.0
    assert float(by_v[0.9]["F_model"]) == pytest.approx(0.8636363636363636, abs=1e-15)
    assert float(by_v[0.9]["F_werner"]) == pytest.approx(0.925, abs=1e-15)
    assert float(by_v[0.0]["F_model"]) == 0.25 and float(by_v[0.0]["F_werner"]) == 0.25
    for col in ("F_model", "F_werner"):
        assert np.all(np.diff([float(r[col]) for r in rows]) > 0)


def test_fidelity_curve_rejects_bad_grid(tmp_path, capsys):
    assert cli.main(["fidelity-curve", "--out", str(tmp_path), "--v-grid", "0.5", "1.2"]) == 2
    assert "error" in capsys.readouterr().err


def test_window_sweep(tmp_path):
    assert cli.main(["window-sweep", "--out", str(tmp_path), "--tau-int-ns", "1", "2", "4", "30"]) == 0
    _, rows = read_rows(tmp_path / "window_sweep.csv")
    assert len(rows) == 4
    for r in rows:
        f = [float(r[f"F_{b.value}"]) for b in states.BellState]
        assert max(f) - min(f) < 1e-12
        assert float(r["bell_threshold"]) == pytest.approx(0.7803300858899107)
        assert float(r["chsh_classical_bound"]) == 2.0
        assert float(r["process_lower"]) <= float(r["process_upper"])
    f = [float(r["F_PhiPlus"]) for r in rows]
    assert all(a > b for a, b in zip(f, f[1:]))
    acc = [float(r["acceptance_pair"]) for r in rows]
    assert all(a < b for a, b in zip(acc, acc[1:]))


def test_window_sweep_needs_waveforms(tmp_path):
    assert cli.main(["window-sweep", "--out", str(tmp_path), "--eta", "0.9"]) == 2


@pytest.mark.parametrize(
    "eta, noise, target",
    [("1.0", "0", 1.0), ("0.9", "0", 0.8636363636363636), ("0.9", "1", 0.25)],
)
def test_tomography(tmp_path, eta, noise, target):
    args = ["tomography", "--out", str(tmp_path), "--eta", eta, "--noise", noise, "--shots", "1000000"]
    assert cli.main(args) == 0
    report = json.loads((tmp_path / "tomography_report.json").read_text())
    assert report["fidelity"] == pytest.approx(target, abs=0.01)
    if target == 1.0:
        assert report["fidelity"] >= 0.999
    assert report["violates_bell"] == (report["fidelity"] > 0.7803300858899107)
    rho = states.density_matrix_from_json((tmp_path / "tomography_rho.json").read_text())
    assert states.fidelity_pure_target(rho, "PhiPlus") == pytest.approx(report["fidelity"])
    first = (tmp_path / "tomography_counts.csv").read_text().splitlines()[0]
    assert first.startswith("# seed=0")


def test_tomography_bit_for_bit(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert cli.main(["tomography", "--out", str(d), "--eta", "0.8", "--seed", "3", "--bell", "PsiMinus"]) == 0
    for name in ("tomography_counts.csv", "tomography_rho.json", "tomography_report.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    c = tmp_path / "c"
    cli.main(["tomography", "--out", str(c), "--eta", "0.8", "--seed", "4", "--bell", "PsiMinus"])
    assert (a / "tomography_counts.csv").read_bytes() != (c / "tomography_counts.csv").read_bytes()


def test_hom(tmp_path):
    assert cli.main(["hom", "--out", str(tmp_path), "--oracle"]) == 0
    _, rows = read_rows(tmp_path / "hom.csv")
    c = [float(r["coincidence"]) for r in rows]
    assert c[0] == pytest.approx(0.5, abs=1e-9) and c[-1] == pytest.approx(0.5, abs=1e-9)
    k = int(np.argmin(c))
    assert c[k] == pytest.approx((1 - float(rows[k]["eta"])) / 2, abs=1e-15)


def test_truth_table_and_chsh(tmp_path):
    assert cli.main(["truth-table", "--out", str(tmp_path), "--eta", "0.9", "--oracle"]) == 0
    _, rows = read_rows(tmp_path / "truth_table.csv")
    assert len(rows) == 48
    assert cli.main(["chsh", "--out", str(tmp_path), "--eta", "1", "--oracle"]) == 0
    res = json.loads((tmp_path / "chsh.json").read_text())
    assert res["S_max"] == pytest.approx(2 * np.sqrt(2), abs=1e-6)
    assert res["_header"].startswith("klmcnot chsh seed=0")


def test_oracle_mismatch_exit_code(tmp_path, monkeypatch, capsys):
    real = oracle.simulate_eta

    def broken(*args, **kw):
        rho, p = real(*args, **kw)
        return rho, p * (1 + 1e-6)

    monkeypatch.setattr(oracle, "simulate_eta", broken)
    assert cli.main(["chsh", "--out", str(tmp_path), "--eta", "0.9", "--oracle"]) == 3
    assert "oracle mismatch" in capsys.readouterr().err


def test_config_file_and_flag_precedence(tmp_path):
    cfg_path = tmp_path / "scenario.yaml"
    cfg_path.write_text(
        yaml.safe_dump(
            {
                "eta": 0.7,
                "seed": 11,
                "shots": 5000,
                "noise": 0.05,
                "gate": {"ppbs1": {"tV": 0.34}},
                "out": "results",
            }
        )
    )
    cfg = cli.ScenarioConfig.load(cfg_path)
    assert cfg.eta == 0.7 and cfg.shots == 5000 and cfg.gate.ppbs1.t_v == 0.34
    assert cfg.out == tmp_path / "results"
    assert cli.main(["chsh", "--config", str(cfg_path), "--seed", "12"]) == 0
    res = json.loads((tmp_path / "results" / "chsh.json").read_text())
    assert "seed=12" in res["_header"] and res["eta"] == 0.7


def test_config_errors(tmp_path):
    with pytest.raises(ValidationError):
        cli.ScenarioConfig.from_mapping({"eta": 0.5, "waveforms": {"control": "memory"}})
    with pytest.raises(ValidationError):
        cli.ScenarioConfig.from_mapping({"waveforms": {"control": str(tmp_path / "missing.csv")}})
    with pytest.raises(ValidationError):
        cli.ScenarioConfig.from_mapping({"colour": "blue"})
    bad = tmp_path / "bad.yaml"
    bad.write_text(yaml.safe_dump({"window": {"tau_int": [-1e-9]}}))
    assert cli.main(["window-sweep", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert cli.main(["chsh", "--config", str(tmp_path / "nope.yaml")]) == 2


def test_waveform_file_inputs(tmp_path, grid):
    from klmcnot import waveform as W

    W.preset_source_waveform(grid).to_csv(tmp_path / "s.csv")
    W.preset_memory_waveform(grid).to_csv(tmp_path / "m.csv")
    cfg_path = tmp_path / "wf.yaml"
    cfg_path.write_text(
        yaml.safe_dump({"waveforms": {"control": "m.csv", "target": "s.csv"}, "window": {"tau_int": [2e-9]}})
    )
    assert cli.main(["window-sweep", "--config", str(cfg_path), "--out", str(tmp_path / "o")]) == 0
    _, from_files = read_rows(tmp_path / "o" / "window_sweep.csv")
    assert cli.main(["window-sweep", "--out", str(tmp_path / "p"), "--tau-int-ns", "2"]) == 0
    _, from_presets = read_rows(tmp_path / "p" / "window_sweep.csv")
    assert float(from_files[0]["eta"]) == pytest.approx(float(from_presets[0]["eta"]), abs=1e-12)
