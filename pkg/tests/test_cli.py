from __future__ import annotations

import json

import pytest

from sheetlint.cli import EXIT_ERROR, EXIT_GATE, EXIT_OK, EXIT_USAGE, main
from tests.support import PATTERN_CORPUS, RUNNING_EXAMPLE


EXAMPLE = str(RUNNING_EXAMPLE)


def run(capsys, *argv: str) -> tuple[int, str, str]:
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_version(capsys):
    code, out, _ = run(capsys, "--version")
    assert code == EXIT_OK
    assert out.startswith("sheetlint ")


@pytest.mark.parametrize("argv", [[], ["analyze"], ["smells", EXAMPLE, "--format", "xml"], ["frobnicate"]])
def test_usage_errors(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == EXIT_USAGE
    assert "usage:" in err


def test_analyze_text(capsys):
    code, out, err = run(capsys, "analyze", EXAMPLE)
    assert code == EXIT_OK
    assert err == ""
    assert "Worksheet Department1" in out
    assert "  Block Department1!B4:F8" in out
    assert "  Block Investment!B9:E11" in out
    assert "row-layer level 1: A9:A11  meta-header A8" in out


def test_analyze_json_is_deterministic(capsys):
    outputs = {run(capsys, "analyze", EXAMPLE, "--format", "json")[1] for _ in range(3)}
    assert len(outputs) == 1
    data = json.loads(outputs.pop())
    assert data["sheets"][0]["blocks"][0]["range"] == "B4:F8"


def test_analyze_missing_file(capsys, tmp_path):
    code, _, err = run(capsys, "analyze", str(tmp_path / "missing.json"))
    assert code == EXIT_ERROR
    assert err.startswith("sheetlint: ")


def test_smells_text(capsys):
    code, out, _ = run(capsys, "smells", EXAMPLE, "--detectors", "group-long-chain")
    assert code == EXIT_OK
    lines = out.splitlines()
    assert lines[0] == "group-long-chain (4)"
    assert lines[1].startswith("  Investment!B3:B3  value=5  risk=low  ")
    assert lines[3].startswith("  Investment!E9:E11  value=7  risk=high  Department1!B4:E4 -> ")
    assert lines[-1] == "4 smells reported."


def test_smells_none_found(capsys):
    code, out, _ = run(capsys, "smells", EXAMPLE, "--detectors", "overburdened-worksheet")
    assert (code, out) == (EXIT_OK, "No smells found.\n")


def test_smells_json(capsys):
    code, out, _ = run(capsys, "smells", EXAMPLE, "--detectors", "inconsistent-group-reference", "--format", "json")
    assert code == EXIT_OK
    assert json.loads(out) == [
        {
            "kind": "inconsistent-group-reference",
            "variant": "",
            "subject_kind": "group",
            "subject": "Investment!B3:B3",
            "worksheet": "Investment",
            "metric_value": 1,
            "risk": None,
            "detail": "inconsistently refers to Total!E4:E8",
        }
    ]


def test_smells_unknown_detector(capsys):
    code, _, err = run(capsys, "smells", EXAMPLE, "--detectors", "nonsense")
    assert code == EXIT_USAGE
    assert "unknown detector 'nonsense'" in err


@pytest.mark.parametrize(
    "detectors, fail_on, expected",
    [
        ("group-long-chain", "high", EXIT_GATE),
        ("group-long-chain", "low", EXIT_GATE),
        ("group-feature-envy", "high", EXIT_OK),
        ("group-feature-envy", "low", EXIT_GATE),
        ("overburdened-worksheet", "low", EXIT_OK),
    ],
)
def test_smells_fail_on(capsys, detectors, fail_on, expected):
    code, _, _ = run(capsys, "smells", EXAMPLE, "--detectors", detectors, "--fail-on", fail_on)
    assert code == expected


def test_smells_with_thresholds_file(capsys, tmp_path):
    cfg = tmp_path / "thresholds.json"
    cfg.write_text(json.dumps({"thresholds": {"overburdened-blocks": {"low": 2, "high": 3}}}), encoding="utf-8")
    code, out, _ = run(capsys, "smells", EXAMPLE, "--detectors", "overburdened-worksheet", "--thresholds", str(cfg))
    assert code == EXIT_OK
    assert "  Investment [blocks]  value=2  risk=low" in out

    cfg.write_text(json.dumps({"thresholds": {"bogus": {"low": 2, "high": 3}}}), encoding="utf-8")
    code, _, err = run(capsys, "smells", EXAMPLE, "--thresholds", str(cfg))
    assert code == EXIT_ERROR
    assert "unknown threshold key 'bogus'" in err


def test_preprocess_stdout(capsys):
    code, out, _ = run(capsys, "preprocess", str(PATTERN_CORPUS))
    assert code == EXIT_OK
    report = json.loads(out)
    assert report["total_files"] == 3
    assert report["filter"] == "complete"
    assert len(report["accepted"]) == 3


def test_preprocess_to_file(capsys, tmp_path):
    target = tmp_path / "reports" / "pre.json"
    code, out, _ = run(capsys, "preprocess", str(PATTERN_CORPUS), "--filter", "has-formulas", "--out", str(target))
    assert code == EXIT_OK
    assert out.startswith("3 of 3 files accepted")
    assert json.loads(target.read_text(encoding="utf-8"))["filter"] == "has-formulas"


def test_preprocess_missing_directory(capsys, tmp_path):
    code, _, err = run(capsys, "preprocess", str(tmp_path / "nope"))
    assert code == EXIT_ERROR
    assert "missing directory" in err


def test_evaluate(capsys, tmp_path):
    cfg = tmp_path / "eval.json"
    cfg.write_text(json.dumps({"detectors": ["baseline-pattern-finder"], "workers": 0, "quartile_step": 25}), encoding="utf-8")
    out_dir = tmp_path / "out"
    code, out, _ = run(capsys, "evaluate", str(PATTERN_CORPUS), "--config", str(cfg), "--out", str(out_dir))
    assert code == EXIT_OK
    assert out.startswith(f"Evaluation of {PATTERN_CORPUS}\n")
    assert f"outputs written to {out_dir}" in out
    assert (out_dir / "records" / "baseline-pattern-finder_row_border.csv").is_file()


def test_evaluate_bad_config(capsys, tmp_path):
    cfg = tmp_path / "eval.json"
    cfg.write_text(json.dumps({"detectors": ["nope"]}), encoding="utf-8")
    code, _, err = run(capsys, "evaluate", str(PATTERN_CORPUS), "--config", str(cfg))
    assert code == EXIT_ERROR
    assert "unknown detector" in err
    code, _, err = run(capsys, "evaluate", str(PATTERN_CORPUS), "--config", str(tmp_path / "absent.json"))
    assert code == EXIT_ERROR


def test_evaluate_missing_corpus(capsys, tmp_path):
    code, _, err = run(capsys, "evaluate", str(tmp_path / "nope"), "--out", str(tmp_path / "out"))
    assert code == EXIT_ERROR
    assert "missing directory" in err
