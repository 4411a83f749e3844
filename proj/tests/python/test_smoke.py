import json
import os
from pathlib import Path

import pytest

import forensics

ROOT = Path(os.environ.get("FORENSICS_SOURCE_DIR", Path(__file__).resolve().parents[2]))
MOCK10 = ROOT / "data" / "fixtures" / "mock10"


def test_verdicts():
    assert forensics.parse_verdict("Yes.") == "yes"
    assert forensics.parse_verdict("No, it looks authentic.") == "no"
    assert forensics.parse_verdict("I'm sorry, I can't help with that.") == "reject"


def test_score_rounds():
    assert forensics.score_rounds(["yes", "reject", "no", "yes", "reject"]) == pytest.approx(2 / 3)
    assert forensics.score_rounds(["reject"] * 5) is None
    with pytest.raises(ValueError):
        forensics.score_rounds(["maybe"])


def test_judge():
    assert forensics.judge_final_percent([4, 3, 5, 4]) == 80.0
    parsed = forensics.parse_judge_scores(
        "Absolute Position Accuracy: 9\nRelative Position Accuracy: 2\nReadability: 3\nCompleteness: 4"
    )
    assert parsed["scores"] == [5, 2, 3, 4]
    with pytest.raises(forensics.ForensicsError):
        forensics.parse_judge_scores("no numbers here")


def test_report():
    report = forensics.parse_report(
        "Location of the Tampering Area: Absolute: top left. Relative: above the cup.\n"
        "Contents of the Tampered Area: a flag\n"
        "Visible Details in the Tampered Area: 1. blur 2. seams\n"
        "Generation Method and Type of the Image: Diffusion, local"
    )
    assert report["method"] == "diffusion"
    assert "flag" in report["contents"]


def test_metrics():
    auc, points = forensics.compute_auc([0.9, 0.5, 0.5, 0.5, 0.1], [True, True, True, False, False])
    assert auc == pytest.approx(100 * 5 / 6)
    assert points[-1][1:] == (1.0, 1.0)
    assert forensics.compute_acc([], []) is None
    assert forensics.expected_auc(0.9, 0.1, 5) == pytest.approx(0.99910908, abs=1e-12)


def test_manifest_and_shots():
    samples = forensics.load_manifest(MOCK10 / "manifest.jsonl")
    assert len(samples) == 10
    pool = ROOT / "data" / "exemplars" / "detect_pool.jsonl"
    assert forensics.sample_shots(pool, 4, 1) == ["ex08", "ex07", "ex04", "ex00"]


def test_run_eval_matches_golden(tmp_path):
    code, metrics = forensics.run_eval(MOCK10 / "eval_config.json", tmp_path)
    assert code == 0
    golden = json.loads((MOCK10 / "golden_metrics.json").read_text())
    assert metrics["acc"] == pytest.approx(golden["acc"])
    assert metrics["auc"] == pytest.approx(golden["auc"])
    assert metrics["config_hash"] == golden["config_hash"]
    assert (tmp_path / "run_record.json").exists()
