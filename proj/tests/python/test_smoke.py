"""End-to-end smoke tests for the python bindings.

These only check that the bindings are wired correctly (arguments, return
shapes, exception mapping); the numerical behaviour is covered by the C++
test suite.
"""

import re
from pathlib import Path

import pytest

import warfarin_rl

CONFIG = str(Path(__file__).resolve().parents[2] / "data" / "smoke.cfg")


def test_config_hash_is_hex_and_override_sensitive():
    h = warfarin_rl.config_hash(CONFIG)
    assert re.fullmatch(r"[0-9a-f]{16}", h)
    assert warfarin_rl.config_hash(CONFIG) == h
    assert warfarin_rl.config_hash(CONFIG, ["cohort.seed=99"]) != h


def test_generate_writes_cohort_csv(tmp_path):
    out = tmp_path / "cohort.csv"
    n = warfarin_rl.generate(CONFIG, str(out), overrides=["cohort.size=20"])
    assert n == 20
    text = out.read_text()
    lines = [line for line in text.splitlines() if line and not line.startswith("#")]
    # one header row plus twenty patients
    assert len(lines) == 21
    assert lines[0].startswith("id,")


def test_evaluate_returns_report_dict():
    report = warfarin_rl.evaluate(
        CONFIG, "aurora", overrides=["cohort.size=12"], per_patient=True
    )
    assert report["policy_name"] == "aurora+revision"
    assert report["cohort_size"] == 12
    assert 0.0 <= report["overall"]["mean_pttr"] <= 1.0
    assert set(report["by_class"]) == {"normal", "sensitive", "highly_sensitive"}
    assert len(report["per_patient"]) == 12

    slim = warfarin_rl.evaluate(CONFIG, "aurora", overrides=["cohort.size=12"])
    assert "per_patient" not in slim
    assert slim["overall"] == report["overall"]


def test_compare_builds_markdown_table():
    result = warfarin_rl.compare(CONFIG, ["aurora", "fixed"], overrides=["cohort.size=10"])
    assert "# Protocol comparison" in result["markdown"]
    assert len(result["reports"]) == 2
    names = [r["policy_name"] for r in result["reports"]]
    assert names[0] == "aurora+revision"
    assert result["csv"].startswith("group,")


def test_errors_map_to_python_exceptions(tmp_path):
    with pytest.raises(warfarin_rl.ConfigurationError):
        warfarin_rl.config_hash(str(tmp_path / "missing.cfg"))
    with pytest.raises(warfarin_rl.ConfigurationError):
        warfarin_rl.evaluate(CONFIG, "aurora", overrides=["not-a-valid-override"])
    with pytest.raises(warfarin_rl.ConfigurationError):
        warfarin_rl.evaluate(CONFIG, "no-such-policy", overrides=["cohort.size=5"])
