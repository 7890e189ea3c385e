"""
Acceptance-scale runs on the canonical linear instance.

Deselect with ``pytest -m "not slow"``; each takes minutes.
"""
import json

import pytest

from src.core.config import Config
from src.harness.cli import main
from tests.conftest import CONFIGS

pytestmark = pytest.mark.slow

CANONICAL = str(CONFIGS / "linear_canonical.json")


def test_rate_band_and_bound_domination(tmp_path):
    code = main(
        [
            "rate-certify", "--problem", CANONICAL, "--trials", "200", "--kmax", "1000000",
            "--threads", "4", "--out", str(tmp_path), "--quiet",
        ]
    )
    summary = json.loads((tmp_path / "summary.json").read_text(encoding="utf-8"))
    rate = summary["rate_fit"]
    assert Config.RATE_SLOPE_MIN <= rate["slope"] <= Config.RATE_SLOPE_MAX
    assert rate["r2"] >= Config.RATE_MIN_R2
    assert summary["bound_dominated"] is True
    assert code == 0


def test_expectation_recursions_on_large_ensemble(tmp_path):
    code = main(
        [
            "verify-lemmas", "--config", str(CONFIGS / "experiment_lemmas.json"), "--problem", CANONICAL,
            "--out", str(tmp_path), "--quiet",
        ]
    )
    report = json.loads((tmp_path / "lemmas.json").read_text(encoding="utf-8"))
    assert report["trials"] == 1000
    assert report["almost_sure"]["passed"] is True
    assert report["expectation"]["passed"] is True
    assert report["controls_caught"] == {"as_B_scaled": True, "fast_recursion_mu_F_scaled": True}
    assert code == 0
