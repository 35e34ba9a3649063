import csv
import io
import json
from pathlib import Path

import jsonschema
import pytest

import yamabe_blowup.verification as verification
from yamabe_blowup.cli import EXIT_CHECK, EXIT_CONFIG, EXIT_IO, EXIT_OK, main

SCHEMAS = Path(__file__).resolve().parents[1] / "docs" / "schemas"


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, schema, *argv):
    code, out, err = run(capsys, *argv, "--json")
    doc = json.loads(out)
    jsonschema.validate(doc, json.loads((SCHEMAS / f"{schema}.json").read_text()))
    return code, doc


def test_constants(capsys):
    code, doc = run_json(capsys, "constants", "constants", "--dim", "11")
    assert code == EXIT_OK and doc["an"] > 0


def test_constants_dimension_ten(capsys):
    code, doc = run_json(capsys, "constants", "constants", "--dim", "10", "--exact")
    assert code == EXIT_OK
    assert doc["dimension_ten_relation"]["holds"] is True


def test_weyl_actions(capsys, tmp_path):
    code, doc = run_json(capsys, "weyl_validate", "weyl", "validate", "--dim", "6")
    assert code == EXIT_OK and doc["accepted"] and doc["pair"] == 0
    code, doc = run_json(capsys, "weyl_sample", "weyl", "sample", "--dim", "5", "--seed", "3")
    assert code == EXIT_OK
    spec = tmp_path / "w.json"
    spec.write_text(json.dumps(doc))
    code, doc = run_json(capsys, "weyl_validate", "weyl", "validate", "--dim", "5", "--spec", str(spec))
    assert code == EXIT_OK
    code, doc = run_json(capsys, "weyl_coercivity", "weyl", "coercivity", "--dim", "4",
                         "--mc-samples", "2000")
    assert code == EXIT_OK and doc["coercive"] is True


def test_inadmissible_diagonal_spec(capsys, tmp_path):
    spec = tmp_path / "bad.json"
    spec.write_text(json.dumps({"kind": "diagonal", "A": [[0, 1, 1], [1, 0, 1], [1, 1, 0]]}))
    code, _, err = run(capsys, "weyl", "validate", "--dim", "3", "--spec", str(spec))
    assert code == EXIT_CONFIG and "sum to zero" in err


def test_bubble_check(capsys):
    code, doc = run_json(capsys, "bubble_check", "bubble", "check", "--dim", "11")
    assert code == EXIT_OK and doc["passed"]


def test_landscape_csv_and_json(capsys, tmp_path):
    out = tmp_path / "land.csv"
    code, _, _ = run(capsys, "landscape", "--dim", "11", "--t-range", "0.8:1.2:2",
                     "--z-range", "0:0.1:2", "--mc-samples", "2000", "--out", str(out))
    assert code == EXIT_OK
    rows = list(csv.reader(io.StringIO(out.read_text())))
    assert rows[0] == ["t", "s", "direction-index", "F", "F_err"]
    assert len(rows) == 5
    code, doc = run_json(capsys, "landscape", "landscape", "--dim", "11", "--t-range", "1:1:1",
                         "--z-range", "0:0:1", "--mc-samples", "2000")
    assert code == EXIT_OK and len(doc["rows"]) == 1


def test_landscape_bad_range(capsys):
    code, _, err = run(capsys, "landscape", "--t-range", "1:2")
    assert code == EXIT_CONFIG and "a:b:steps" in err


def test_saddle(capsys):
    code, doc = run_json(capsys, "saddle", "saddle", "--dim", "11")
    assert code == EXIT_OK and doc["passed"]
    assert "critical_point" in doc


def test_saddle_failures(capsys):
    code, doc = run_json(capsys, "saddle", "saddle", "--dim", "11", "--eta", "0.05", "--eps", "0.9")
    assert code == EXIT_CHECK and not doc["passed"]
    code, _, _ = run(capsys, "saddle", "--dim", "10")
    assert code == EXIT_CONFIG


def test_curvature_check(capsys):
    code, doc = run_json(capsys, "curvature_check", "curvature-check", "--dim", "11")
    assert code == EXIT_OK and doc["passed"]
    code, _, _ = run(capsys, "curvature-check", "--eps", "0.01")
    assert code == EXIT_CONFIG


def test_classify(capsys):
    code, out, _ = run(capsys, "classify", "--dim", "8")
    assert code == EXIT_OK and out.strip() == "compact_below_minimal_level"
    code, doc = run_json(capsys, "classify", "classify", "--dim", "12", "--lcf", "true",
                         "--perturbation", "nonpos")
    assert doc["verdict"] == "blowup_constructible"
    code, _, _ = run(capsys, "classify", "--dim", "11", "--lcf", "yes", "--weyl-nonzero", "yes")
    assert code == EXIT_CONFIG


def test_argument_errors_exit_one(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["classify", "--lcf", "maybe"])
    assert exc.value.code == EXIT_CONFIG
    with pytest.raises(SystemExit) as exc:
        main(["no-such-command"])
    assert exc.value.code == EXIT_CONFIG
    code, _, _ = run(capsys, "constants", "--tol", "saddle=1")
    assert code == EXIT_CONFIG


def test_io_errors_exit_two(capsys, tmp_path):
    code, _, err = run(capsys, "weyl", "validate", "--spec", str(tmp_path / "missing.json"))
    assert code == EXIT_IO
    code, _, _ = run(capsys, "constants", "--out", str(tmp_path / "nope" / "x.json"))
    assert code == EXIT_IO


def test_spec_dimension_mismatch(capsys, tmp_path):
    spec = tmp_path / "w.json"
    spec.write_text(json.dumps({"kind": "circulant", "n": 6}))
    code, _, _ = run(capsys, "weyl", "validate", "--dim", "7", "--spec", str(spec))
    assert code == EXIT_CONFIG


@pytest.fixture
def cheap_battery(monkeypatch):
    monkeypatch.setattr(verification, "CHECKS", [verification.check_exact_identities,
                                                 verification.check_weyl_algebra,
                                                 verification.check_regime_table])


def test_verify_all_cheap_subset(capsys, cheap_battery):
    code, doc = run_json(capsys, "verify_all", "verify-all", "--dim", "11")
    assert code == EXIT_OK and doc["passed"] and doc["failed"] == []


def test_verify_all_sabotaged_tolerance(capsys, cheap_battery):
    code, out, err = run(capsys, "verify-all", "--tol", "weyl_algebra=-1")
    assert code == EXIT_CHECK
    assert "weyl_algebra" in err
    assert "FAIL weyl_algebra" in out


def test_verify_all_unknown_tolerance(capsys, cheap_battery):
    code, _, err = run(capsys, "verify-all", "--tol", "bogus=1")
    assert code == EXIT_CONFIG
    code, _, _ = run(capsys, "verify-all", "--tol", "saddle")
    assert code == EXIT_CONFIG


def test_global_flags_before_subcommand(capsys):
    code, out, _ = run(capsys, "--json", "--seed", "2", "classify", "--dim", "9")
    assert code == EXIT_OK and json.loads(out)["verdict"] == "compact_below_minimal_level"
