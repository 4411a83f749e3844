"""Python access to the forensics evaluation core."""

from ._forensics import (
    ForensicsError,
    compute_acc,
    compute_auc,
    expected_auc,
    judge_final_percent,
    load_manifest,
    parse_judge_scores,
    parse_report,
    parse_verdict,
    run_eval,
    sample_shots,
    score_rounds,
)

__all__ = [
    "ForensicsError",
    "compute_acc",
    "compute_auc",
    "expected_auc",
    "judge_final_percent",
    "load_manifest",
    "parse_judge_scores",
    "parse_report",
    "parse_verdict",
    "run_eval",
    "sample_shots",
    "score_rounds",
]
