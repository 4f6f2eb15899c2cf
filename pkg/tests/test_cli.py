import csv
import json
from pathlib import Path

import pytest

from cartlab.cli import main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def run(argv, tmp_path):
    return main(list(argv) + ["--out-dir", str(tmp_path)])


def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_fit_and_predict_round_trip(tmp_path, capsys):
    data = _write(tmp_path, "d.csv", "x1,y\n0.1,0\n0.2,0\n0.8,1\n0.9,1\n")
    assert run(["fit", data, "--depth", "1"], tmp_path) == 0
    tree = json.loads((tmp_path / "tree.json").read_text())
    root = tree["nodes"][0]
    assert root["feature"] == 1 and root["threshold"] == 0.5 and root["delta"] == 0.25
    assert json.loads(capsys.readouterr().out)["training_sse"] == 0.0
    pts = _write(tmp_path, "p.csv", "x1\n0.15\n0.5\n0.95\n")
    assert run(["predict", str(tmp_path / "tree.json"), pts], tmp_path) == 0
    rows = list(csv.DictReader((tmp_path / "predictions.csv").open()))
    assert [float(r["prediction"]) for r in rows] == [0.0, 0.0, 1.0]
    for cmd in ("fit", "predict"):
        assert (tmp_path / f"{cmd}_manifest.json").is_file()


@pytest.mark.parametrize("content", ["", "a,b\n1,2\n", "x1,y\n0.1,abc\n", "x1,y\n0.1\n"])
def test_fit_bad_csv(tmp_path, capsys, content):
    data = _write(tmp_path, "bad.csv", content)
    assert run(["fit", data, "--depth", "1"], tmp_path) == 2
    assert "cartlab fit" in capsys.readouterr().err


def test_fit_bad_arguments(tmp_path):
    data = _write(tmp_path, "d.csv", "x1,y\n0.1,0\n0.9,1\n")
    assert run(["fit", data, "--depth", "-1"], tmp_path) == 2
    assert run(["fit", str(tmp_path / "missing.csv"), "--depth", "1"], tmp_path) == 2
    assert run(["predict", str(tmp_path / "missing.json"), data], tmp_path) == 2


def test_predict_outside_domain(tmp_path):
    data = _write(tmp_path, "d.csv", "x1,y\n0.1,0\n0.9,1\n")
    run(["fit", data, "--depth", "1"], tmp_path)
    pts = _write(tmp_path, "p.csv", "x1\n1.5\n")
    assert run(["predict", str(tmp_path / "tree.json"), pts], tmp_path) == 2


def test_usage_errors_exit_two(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["bogus"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["fit"])
    assert exc.value.code == 2
    assert run(["sid-check", str(tmp_path / "nope.json")], tmp_path) == 2
    bad = _write(tmp_path, "bad.toml", "[rate\n")
    assert run(["rate", bad], tmp_path) == 2
    unknown = _write(tmp_path, "u.json", json.dumps({"rate": {"n_gird": [1]}}))
    assert run(["rate", unknown], tmp_path) == 2


def test_sid_check(tmp_path, capsys):
    assert run(["sid-check", str(CONFIGS / "linear_signal.json"), "--k", "6"], tmp_path) == 0
    report = json.loads((tmp_path / "sid_report.json").read_text())
    assert report["lambda_hat"] == pytest.approx(0.75, abs=1e-6)
    assert "lambda_hat=" in capsys.readouterr().out
    assert (tmp_path / "sid_cells.csv").is_file()


def test_sid_check_xor(tmp_path):
    argv = ["sid-check", str(CONFIGS / "xor_signal.json"), "--family", "dyadic", "--depth", "1"]
    assert run(argv, tmp_path) == 0
    assert json.loads((tmp_path / "sid_report.json").read_text())["lambda_hat"] <= 1e-6


def test_lrp_check_exit_codes(tmp_path):
    assert run(["lrp-check", str(CONFIGS / "linear_component.json"), "--k", "10"], tmp_path) == 0
    cert = json.loads((tmp_path / "lrp_certificate.json").read_text())
    assert cert["tau_measured"] == pytest.approx(2 * 3 ** 0.5)
    assert run(["lrp-check", str(CONFIGS / "convex_component.json"), "--k", "10"], tmp_path) == 0
    assert run(["lrp-check", str(CONFIGS / "sawtooth_component.json")], tmp_path) == 1


def test_rate_command(tmp_path):
    cfg = _write(tmp_path, "r.json", json.dumps({"rate": {"n_grid": [64, 128, 256], "replicates": 3}}))
    assert run(["rate", cfg, "--threads", "2"], tmp_path) == 0
    fit = json.loads((tmp_path / "rate_fit.json").read_text())
    assert fit["slope"] < 0
    manifest = json.loads((tmp_path / "rate_manifest.json").read_text())
    assert manifest["config"]["replicates"] == 3


def test_rate_replicate_override(tmp_path):
    cfg = _write(tmp_path, "r.toml", '[rate]\nn_grid = [32, 64, 128]\nreplicates = 5\n')
    assert run(["rate", cfg, "--replicates", "1"], tmp_path) == 0
    rows = list(csv.DictReader((tmp_path / "rate.csv").open()))
    assert len(rows) == 3


def test_xor_command(tmp_path):
    cfg = _write(tmp_path, "x.toml", "[xor]\nn_grid = [50, 200]\nreplicates = 3\nn_mc = 500\n")
    assert run(["xor", cfg], tmp_path) == 0
    summary = json.loads((tmp_path / "xor_summary.json").read_text())
    assert set(summary["fractions"]) == {"50", "200"}
    bad = _write(tmp_path, "xb.toml", "[xor]\nsize = 3\n")
    assert run(["xor", bad], tmp_path) == 2


def test_verify_command(tmp_path, capsys):
    cfg = _write(tmp_path, "v.toml", '[verify]\nsignals = ["linear", "xor"]\ncases = 4\n')
    assert run(["verify", cfg], tmp_path) == 0
    out = capsys.readouterr().out
    assert "PASS linear" in out and "expected failure" in out
    assert run(["verify", cfg, "--tolerance", "0"], tmp_path) == 1
    assert json.loads((tmp_path / "verify.json").read_text())["passed"] is False


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("CARTLAB_OUTPUT_DIR", str(tmp_path / "env-out"))
    assert main(["sid-check", str(CONFIGS / "linear_signal.json"), "--k", "2"]) == 0
    assert (tmp_path / "env-out" / "sid_report.json").is_file()
