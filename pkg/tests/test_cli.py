import csv
import json

import pytest

from derivlab.cli import main
from derivlab.config import ConfigError, ExperimentConfig
from derivlab.runner import canonical_hash, run, verify_report


@pytest.fixture(scope="module")
def default_report():
    return run(ExperimentConfig())


def test_default_config_passes(default_report):
    det = default_report["deterministic"]
    assert det["verdict"] == "pass", det["reasons"]
    assert default_report["schema_version"] == 1
    assert default_report["content_hash"] == canonical_hash(det)
    assert det["contraction_constants"]["L"] == pytest.approx(0.5)
    assert det["contraction_constants"]["L_corollary"] == pytest.approx(0.25)
    assert det["contraction_constants"]["discrepancy"] is True


def test_run_is_deterministic(default_report):
    again = run(ExperimentConfig())
    assert json.dumps(again["deterministic"], sort_keys=True) == json.dumps(default_report["deterministic"], sort_keys=True)
    assert again["content_hash"] == default_report["content_hash"]


def test_exact_config():
    report = run(ExperimentConfig(c_g=0.0, c_h=0.0))
    det = report["deterministic"]
    assert det["verdict"] == "pass"
    assert det["instance"]["theta"] == 0.0
    assert all(r["iterations_max"] == 1 for r in det["reconstructions"])


def test_expansive_config():
    det = run(ExperimentConfig(regime="expansive", r=0.5, seed=3))["deterministic"]
    assert det["verdict"] == "pass", det["reasons"]
    assert det["contraction_constants"]["L"] == pytest.approx(2**-0.5)
    names = {c["name"] for c in det["checks"]}
    assert {"direct/eq213", "direct/eq36", "direct/cor26"} <= names


@pytest.mark.parametrize(
    "changes",
    [dict(r=1.5), dict(regime="expansive", r=3.0), dict(s=1.2), dict(t=0), dict(tol=0.0), dict(k_max=0),
     dict(dim=0), dict(norm_kind="nuclear"), dict(circle_count=1)],
)
def test_config_rejections(changes):
    with pytest.raises(ConfigError):
        ExperimentConfig().replace(**changes).validate()


def test_config_json_roundtrip():
    cfg = ExperimentConfig(s=0.3 + 0.2j, t=-0.4j, seed=9)
    assert ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"bogus": 1})


def test_cli_run_and_verify(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seed": 2, "s": {"re": 0.25, "im": 0.5}, "sample_count": 8}))
    out, table = tmp_path / "report.json", tmp_path / "points.csv"
    assert main(["run", "--config", str(cfg), "--out", str(out), "--csv", str(table)]) == 0
    report = json.loads(out.read_text())
    assert report["deterministic"]["config"]["s"] == {"re": 0.25, "im": 0.5}
    assert "output_path" not in report["deterministic"]["config"]
    with open(table) as fh:
        rows = list(csv.DictReader(fh))
    assert set(rows[0]) == {"check", "point_id", "norm_x", "lhs", "rhs", "slack"}
    assert any(r["check"] == "direct/cor24" for r in rows)
    assert main(["verify", str(out)]) == 0


def test_cli_seed_override_changes_hash(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["run", "--out", str(a)]) == 0
    assert main(["run", "--seed", "5", "--out", str(b)]) == 0
    ha = json.loads(a.read_text())["content_hash"]
    hb = json.loads(b.read_text())["content_hash"]
    assert ha != hb


def test_cli_config_error_exit_code(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"r": 1.5}))
    assert main(["run", "--config", str(cfg)]) == 2
    assert "regime mismatch" in capsys.readouterr().err


def test_cli_io_error_exit_code(tmp_path):
    assert main(["run", "--config", str(tmp_path / "missing.json")]) == 3
    assert main(["verify", str(tmp_path / "missing.json")]) == 3


def test_verify_detects_flipped_verdict(default_report):
    bad = json.loads(json.dumps(default_report))
    bad["deterministic"]["checks"][4]["satisfied"] = False
    code, message = verify_report(bad)
    assert code == 1 and bad["deterministic"]["checks"][4]["name"] in message


def test_verify_detects_tampered_values(default_report):
    bad = json.loads(json.dumps(default_report))
    check = next(c for c in bad["deterministic"]["checks"] if c["name"] == "direct/cor24")
    check["points"][0]["lhs"] = check["points"][0]["rhs"] + 1.0
    code, message = verify_report(bad)
    assert code == 1 and "direct/cor24" in message


def test_verify_detects_hash_mismatch(default_report):
    bad = json.loads(json.dumps(default_report))
    bad["deterministic"]["instance"]["theta"] = 0.0
    code, message = verify_report(bad)
    assert code == 1 and "content_hash" in message


def test_verify_overall_verdict(default_report):
    bad = json.loads(json.dumps(default_report))
    bad["deterministic"]["verdict"] = "fail"
    assert verify_report(bad)[0] == 1


def test_verify_schema_errors(default_report, tmp_path):
    bad = json.loads(json.dumps(default_report))
    bad["schema_version"] = 2
    code, message = verify_report(bad)
    assert code == 2 and "schema_version" in message
    del bad["deterministic"]
    assert verify_report(bad)[0] == 2
    path = tmp_path / "r.json"
    path.write_text("{not json")
    assert main(["verify", str(path)]) == 2


def test_timing_excluded_from_hash(default_report):
    other = json.loads(json.dumps(default_report))
    other["timing"]["wall_clock_s"] = 1e9
    assert verify_report(other)[0] == 0


def test_sweep_writes_one_csv(tmp_path, capsys):
    out = tmp_path / "sweep.csv"
    code = main(["sweep", "--param", "r", "--values", "2.5,3,4", "--out", str(out)])
    assert code == 0
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    assert [r["value"] for r in rows] == ["2.5", "3", "4"]
    assert all(r["verdict"] == "pass" for r in rows)


def test_sweep_reports_out_of_regime_values(tmp_path):
    out = tmp_path / "sweep.csv"
    assert main(["sweep", "--param", "r", "--values", "3,1.5", "--out", str(out)]) == 1
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    assert rows[1]["verdict"] == "config_error"
    assert main(["sweep", "--param", "output_path", "--values", "x", "--out", str(out)]) == 2
