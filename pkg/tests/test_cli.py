import csv
import json
import subprocess
import sys

import pytest

from carnot_hardy import cli
from carnot_hardy import inequalities as ineq
from carnot_hardy.identities import NEGATIVE_CONTROLS, identity_catalog
from carnot_hardy.sharpness import problems


def _run(tmp_path, *argv, name="out.json"):
    out = tmp_path / name
    code = cli.main([*argv, "--output", str(out)])
    return code, (out.read_text() if out.exists() else None)


def _strip_time(text):
    d = json.loads(text)
    d.pop("timestamp")
    return d


def test_symbolic_single_id(tmp_path):
    code, text = _run(tmp_path, "symbolic", "--id", "heis_tt", "--trials", "5")
    assert code == cli.EXIT_OK
    d = json.loads(text)
    assert d["schema"] == cli.report_schema_version() == "carnot-hardy-report/1"
    assert d["status"] == "complete"
    assert {r["id"] for r in d["results"]["symbolic"]} == {"heis_tt"}
    assert d["summary"]["coverage"]["identities"] == ["heis_tt"]


def test_negative_control_counts_as_expected_failure(tmp_path):
    code, text = _run(tmp_path, "symbolic", "--id", "heis_tt_no_commutator", "--model", "heis:1",
                      "--alpha", "1", "--beta", "0")
    rows = json.loads(text)["results"]["symbolic"]
    assert code == cli.EXIT_OK
    assert all(r["expected"] == "fail" and not r["pass"] and r["pass_as_control"] for r in rows)


def test_inadmissible_parameters(tmp_path, capsys):
    code, text = _run(tmp_path, "verify", "--id", "heis_2", "--model", "heis:1", "--alpha", "1", "--beta", "0")
    assert code == cli.EXIT_USAGE
    assert text is None
    assert "inadmissible: α(α−4) < 0" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["frobnicate"],
    ["symbolic", "--id", "no_such_identity"],
    ["verify", "--model", "euclid:0"],
    ["verify", "--alpha", "x"],
    ["sweep", "--trials", "0"],
    ["sharpness", "--id", "nope"],
])
def test_usage_errors(tmp_path, argv):
    code, _ = _run(tmp_path, *argv)
    assert code == cli.EXIT_USAGE


def test_verify_json_and_csv(tmp_path):
    argv = ["verify", "--id", "hardy_euclid", "--model", "euclid:3", "--field", "nonradial:1,1", "--nodes", "16"]
    code, text = _run(tmp_path, *argv)
    assert code == cli.EXIT_OK
    rep = json.loads(text)["results"]["inequalities"][0]
    assert rep["verdict"] == "pass" and rep["deficit"] >= 0
    code, text = _run(tmp_path, *argv, "--format", "csv", name="out.csv")
    rows = list(csv.reader(text.splitlines()))
    assert rows[0] == ["# carnot-hardy-report/1"]
    assert rows[1] == cli.CSV_HEADER
    assert rows[2][:3] == ["inequality", "hardy_euclid", "euclid:3"]
    assert rows[2][-1] == "pass"


def test_error_cap_gives_partial_report(tmp_path):
    code, text = _run(tmp_path, "verify", "--id", "hardy_euclid", "--model", "euclid:3", "--err-cap", "1e-30")
    assert code == cli.EXIT_CAP
    d = json.loads(text)
    assert d["status"] == "partial" and d["message"]


def test_failed_verdict_exit_code(tmp_path, monkeypatch, capsys):
    monkeypatch.setattr(ineq, "verdict_of", lambda deficit, err, scale: (False, 0.0))
    code, text = _run(tmp_path, "verify", "--id", "hardy_euclid", "--model", "euclid:3", "--nodes", "8")
    assert code == cli.EXIT_FAIL
    assert json.loads(text)["summary"]["failures"]
    assert "FAIL" in capsys.readouterr().err


def test_config_file_overridden_by_flags(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"id": "heis_ttstar", "trials": 3, "seed": 11}))
    code, text = _run(tmp_path, "symbolic", "--config", str(cfg), "--trials", "4")
    assert code == cli.EXIT_OK
    d = json.loads(text)
    assert d["config"]["trials"] == 4 and d["config"]["seed"] == 11
    assert {r["id"] for r in d["results"]["symbolic"]} == {"heis_ttstar"}
    cfg.write_text(json.dumps({"bogus": 1}))
    assert _run(tmp_path, "symbolic", "--config", str(cfg))[0] == cli.EXIT_USAGE


def test_sweep_reports_inadmissible_cells(tmp_path):
    code, text = _run(tmp_path, "sweep", "--id", "heis_2", "--model", "heis:1", "--field", "logbump:1,1",
                      "--nodes", "8", "--alpha-grid", "0,1,5", "--beta-grid", "0")
    assert code == cli.EXIT_OK
    cells = json.loads(text)["results"]["sweeps"][0]["cells"]
    assert [c["admissible"] for c in cells] == [True, False, True]


def test_sharpness_is_deterministic(tmp_path):
    argv = ["sharpness", "--id", "hardy_euclid3", "--budget", "4"]
    a = _strip_time(_run(tmp_path, *argv, name="a.json")[1])
    b = _strip_time(_run(tmp_path, *argv, name="b.json")[1])
    assert a == b
    assert a["results"]["sharpness"][0]["evaluations"] <= 4


def test_module_entry_point(tmp_path):
    out = tmp_path / "o.json"
    p = subprocess.run([sys.executable, "-m", "carnot_hardy.cli", "symbolic", "--id", "zt_commute",
                        "--trials", "2", "--output", str(out)], capture_output=True, text=True)
    assert p.returncode == 0, p.stderr
    assert json.loads(out.read_text())["command"] == "symbolic"


@pytest.mark.slow
def test_all_covers_every_catalog(tmp_path):
    code, text = _run(tmp_path, "all", "--nodes", "16", "--trials", "5", "--budget", "5")
    assert code == cli.EXIT_OK
    cov = json.loads(text)["summary"]["coverage"]
    assert set(cov["identities"]) == {c.id for c in identity_catalog()} | set(NEGATIVE_CONTROLS)
    assert set(cov["inequalities"]) == set(ineq.catalog())
    assert set(cov["sharpness"]) == set(problems())
