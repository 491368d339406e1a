import csv
import io
import json
import subprocess
import sys


from helpers import GOLDEN, SCENARIOS
from pleak.cli import EXIT_ISSUES, EXIT_OK, EXIT_USAGE, run_cli

AID = str(SCENARIOS / "aid" / "model.json")
AID_BAD = str(SCENARIOS / "aid" / "model_invalid.json")
SHIPS = SCENARIOS / "ships"


def cli(tmp_path, *args):
    return run_cli([*args, "--out", str(tmp_path), "--quiet"])


def test_validate_exit_codes(tmp_path, capsys):
    assert run_cli(["validate", AID, "--out", str(tmp_path)]) == EXIT_OK
    assert run_cli(["validate", AID_BAD, "--out", str(tmp_path)]) == EXIT_ISSUES
    out = capsys.readouterr().out
    assert "V1" in out and "a_feasible" in out


def test_analysis_refuses_invalid_model(tmp_path):
    assert cli(tmp_path, "disclosure", AID_BAD) == EXIT_ISSUES
    assert not (tmp_path / "disclosure.txt").exists()


def test_usage_errors(tmp_path, capsys):
    assert run_cli(["frobnicate", AID]) == EXIT_USAGE
    assert run_cli(["validate", str(tmp_path / "missing.json")]) == EXIT_USAGE
    assert cli(tmp_path, "advantage", str(SHIPS / "count.json"), "--advantage", "1.5") == EXIT_USAGE
    assert run_cli(["validate", AID, "--format", "yaml"]) == EXIT_USAGE


def test_infeasible_beta_names_remedy(tmp_path, capsys):
    code = cli(tmp_path, "sens-derivative", str(SHIPS / "min.json"), "--beta", "0.3")
    assert code == EXIT_USAGE
    assert "lower --beta or raise --epsilon" in capsys.readouterr().err


def test_disclosure_csv_matches_golden(tmp_path):
    assert cli(tmp_path, "disclosure", AID, "--format", "csv") == EXIT_OK
    got = list(csv.reader(io.StringIO((tmp_path / "disclosure.csv").read_text())))
    want = list(csv.reader(io.StringIO((GOLDEN / "aid_disclosure.csv").read_text())))
    assert got == want


def test_deps_csv_matches_golden(tmp_path):
    assert cli(tmp_path, "deps", AID, "--format", "csv") == EXIT_OK
    got = list(csv.reader(io.StringIO((tmp_path / "deps.csv").read_text())))
    want = list(csv.reader(io.StringIO((GOLDEN / "aid_deps.csv").read_text())))
    assert got == want


def test_leaks_when_dot_files(tmp_path):
    model = str(SHIPS / "workflow.json")
    assert cli(tmp_path, "leaks-when", model, "--target", "reachable_ports", "--format", "dot") == EXIT_OK
    names = sorted(p.name for p in (tmp_path / "leaks-when").iterdir())
    assert names == ["reachable_ports_0_0.dot", "reachable_ports_1_0.dot"]


def test_sens_global_json(tmp_path):
    assert cli(tmp_path, "sens-global", str(SHIPS / "global_distinct.json"), "--format", "json") == EXIT_OK
    doc = json.loads((tmp_path / "sens-global.json").read_text())
    assert doc["schemaVersion"] == 1
    cells = {t: row["workflow"] for t, row in doc["cells"].items()}
    assert cells["ship"] == "1"
    assert all(v == "inf" for t, v in cells.items() if t != "ship")


def test_sens_derivative_json(tmp_path):
    assert cli(tmp_path, "sens-derivative", str(SHIPS / "min.json"), "--format", "json") == EXIT_OK
    doc = json.loads((tmp_path / "sens-derivative.json").read_text())
    assert 0.045 <= float(doc["sensitivity"]) <= 0.055
    assert doc["epsilon"] == 1.0 and doc["beta"] == 0.1


def test_advantage_endpoints(tmp_path, capsys):
    model = str(SHIPS / "count.json")
    assert run_cli(["advantage", model, "--advantage", "0", "--out", str(tmp_path)]) == EXIT_OK
    assert "relative error: inf" in capsys.readouterr().out
    assert run_cli(["advantage", model, "--advantage", "1", "--out", str(tmp_path)]) == EXIT_OK
    assert "relative error: 0" in capsys.readouterr().out


def test_outputs_are_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert cli(out, "leaks-when", str(SHIPS / "workflow.json"), "--target", "port_assignment",
                   "--format", "json") == EXIT_OK
    assert (a / "leaks-when.json").read_text() == (b / "leaks-when.json").read_text()


def test_console_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "pleak.cli", "validate", AID, "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert out.returncode == 0
