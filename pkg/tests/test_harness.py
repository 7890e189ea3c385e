"""End-to-end CLI runs on small ensembles."""
import json

import pandas as pd
import pytest

from src.core.config import Config
from src.harness.cli import main
from src.harness.exports import finite_or_none, validate_summary
from src.harness.manifest import sha256_of_file, verify_manifest
from tests.conftest import CONFIGS

CANONICAL = str(CONFIGS / "linear_canonical.json")


@pytest.fixture(autouse=True)
def short_series(monkeypatch):
    # fewer explicit D1 terms; the tail bound covers the rest
    monkeypatch.setattr(Config, "D1_TERMS", 200_000)


def _cli(*args: str) -> int:
    return main([*args, "--quiet"])


def _read(path):
    return json.loads(path.read_text(encoding="utf-8"))


# ── run ───────────────────────────────────────────────────────────────────────


def test_run_with_zero_steps(tmp_path):
    code = _cli("run", "--problem", CANONICAL, "--trials", "1", "--kmax", "0", "--out", str(tmp_path))
    assert code == 0
    series = pd.read_csv(tmp_path / "series.csv")
    assert list(series.columns) == ["k", "V_k", "mean_xhat_sq", "mean_yhat_sq", "log10_bound"]
    assert series["k"].tolist() == [0]
    assert series["V_k"].iloc[0] > 0.0
    summary = _read(tmp_path / "summary.json")
    validate_summary(summary)
    assert summary["status"] == "ok"
    assert summary["rate_fit"] is None
    assert summary["checkpoints"][0]["log10_bound"] is None
    assert verify_manifest(tmp_path) == []
    assert (tmp_path / "events.jsonl").exists()


def test_run_exports(tmp_path):
    code = _cli(
        "run", "--problem", CANONICAL, "--trials", "4", "--kmax", "3000", "--checkpoints", "40",
        "--out", str(tmp_path),
    )
    assert code == 0
    constants = _read(tmp_path / "constants.json")
    assert {"B", "C", "Kstar", "D1", "log10_D2", "log10_D"} <= set(constants)
    trajectories = pd.read_csv(tmp_path / "trajectories.csv")
    assert set(trajectories["trial"]) == {0, 1, 2, 3}
    series = pd.read_csv(tmp_path / "series.csv")
    past = series[series["k"] >= max(constants["Kstar"], 1)]
    assert past["log10_bound"].notna().all()
    assert (past["V_k"].apply(lambda v: v > 0)).all()
    summary = _read(tmp_path / "summary.json")
    assert summary["bound_dominated"] is True
    manifest = _read(tmp_path / "manifest.json")
    assert set(manifest["files"]) >= {"series.csv", "trajectories.csv", "constants.json", "summary.json"}


def test_series_is_byte_identical_across_runs(tmp_path):
    args = ("run", "--problem", CANONICAL, "--trials", "3", "--kmax", "2000", "--seed", "5")
    assert _cli(*args, "--out", str(tmp_path / "a")) == 0
    assert _cli(*args, "--out", str(tmp_path / "b")) == 0
    assert _cli(*args, "--out", str(tmp_path / "c"), "--threads", "2") == 0
    digests = {sha256_of_file(tmp_path / d / "series.csv") for d in "abc"}
    assert len(digests) == 1


def test_thread_count_does_not_change_outputs(tmp_path):
    args = ("run", "--problem", CANONICAL, "--trials", "4", "--kmax", "2000", "--seed", "11")
    assert _cli(*args, "--threads", "1", "--out", str(tmp_path / "serial")) == 0
    assert _cli(*args, "--threads", "2", "--out", str(tmp_path / "parallel")) == 0
    for name in ("series.csv", "trajectories.csv", "summary.json", "manifest.json"):
        serial = (tmp_path / "serial" / name).read_bytes()
        assert serial == (tmp_path / "parallel" / name).read_bytes(), name


def test_manifest_detects_edits(tmp_path):
    assert _cli("run", "--problem", CANONICAL, "--trials", "1", "--kmax", "0", "--out", str(tmp_path)) == 0
    with open(tmp_path / "series.csv", "a", encoding="utf-8") as f:
        f.write("tampered\n")
    assert verify_manifest(tmp_path) == ["series.csv"]


@pytest.mark.parametrize("threads", ["1", "2"])
def test_divergent_run_aborts_with_partial_output(tmp_path, threads):
    code = _cli(
        "run", "--problem", str(CONFIGS / "two_state_chain.json"), "--alpha0", "100", "--beta0", "50",
        "--trials", "2", "--kmax", "5000", "--threads", threads, "--out", str(tmp_path),
    )
    assert code == 2
    series = pd.read_csv(tmp_path / "series.csv")
    assert len(series) >= 1 and series["k"].iloc[0] == 0
    summary = _read(tmp_path / "summary.json")
    assert summary["status"] == "aborted"
    assert summary["abort"]["error"] == "NonFiniteIterateError"
    validate_summary(summary)


# ── configuration errors ──────────────────────────────────────────────────────


def test_zero_trials_is_a_config_error(tmp_path, capsys):
    code = _cli("run", "--problem", CANONICAL, "--trials", "0", "--out", str(tmp_path))
    assert code == 3
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "ProblemConfigError"
    assert err["field"] == "trials"


def test_missing_problem_file(tmp_path, capsys):
    code = _cli("run", "--problem", str(tmp_path / "missing.json"), "--out", str(tmp_path))
    assert code == 3
    assert json.loads(capsys.readouterr().err.strip().splitlines()[-1])["field"] == "problem"


def test_flags_override_experiment_config(tmp_path):
    config = tmp_path / "experiment.json"
    config.write_text(
        json.dumps({"problem": CANONICAL, "trials": 7, "k_max": 50, "out": str(tmp_path / "from_file")}),
        encoding="utf-8",
    )
    out = tmp_path / "from_flag"
    assert _cli("run", "--config", str(config), "--trials", "2", "--out", str(out)) == 0
    summary = _read(out / "summary.json")
    assert summary["trials"] == 2
    assert summary["k_max"] == 50
    assert not (tmp_path / "from_file").exists()


def test_unknown_experiment_field_rejected(tmp_path, capsys):
    config = tmp_path / "experiment.json"
    config.write_text(json.dumps({"problem": CANONICAL, "iterations": 5}), encoding="utf-8")
    assert _cli("run", "--config", str(config), "--out", str(tmp_path)) == 3
    assert json.loads(capsys.readouterr().err.strip().splitlines()[-1])["field"] == "iterations"


# ── other subcommands ─────────────────────────────────────────────────────────


def test_mixing_on_two_state_chain(tmp_path):
    code = _cli("mixing", "--problem", str(CONFIGS / "two_state_chain.json"), "--out", str(tmp_path))
    assert code == 0
    report = _read(tmp_path / "mixing.json")
    assert report["profile"]["tau_table"]["0.01"] == 5
    tv = pd.read_csv(tmp_path / "tv_profile.csv")
    assert tv["value"].iloc[0] == pytest.approx(0.5)
    assert len(tv) == report["horizon"] + 1
    bias = pd.read_csv(tmp_path / "bias_profile.csv")
    assert bias["value"].iloc[1] == pytest.approx(0.4 * 0.5)


def test_mixing_on_autoregressive_noise(tmp_path):
    code = _cli("mixing", "--problem", str(CONFIGS / "robust_pr_d10.json"), "--out", str(tmp_path))
    assert code == 0
    surrogate = _read(tmp_path / "mixing.json")["surrogate"]
    assert surrogate["spectral_radius"] == 0.0


def test_demo_pr_scalar(tmp_path):
    code = _cli(
        "demo-pr", "--problem", str(CONFIGS / "robust_pr_scalar.json"), "--trials", "3", "--kmax", "2000",
        "--out", str(tmp_path),
    )
    assert code == 0
    report = _read(tmp_path / "demo_pr.json")
    assert len(report["per_trial"]) == 3
    assert report["mse_averaged"] >= 0.0
    assert report["mean_last_error"] < 0.1


def test_demo_pr_rejects_other_problems(tmp_path, capsys):
    assert _cli("demo-pr", "--problem", CANONICAL, "--out", str(tmp_path)) == 3
    assert json.loads(capsys.readouterr().err.strip().splitlines()[-1])["field"] == "kind"


def test_verify_lemmas_small_ensemble(tmp_path):
    code = _cli("verify-lemmas", "--problem", CANONICAL, "--trials", "10", "--kmax", "3000", "--out", str(tmp_path))
    assert code == 0
    report = _read(tmp_path / "lemmas.json")
    assert report["almost_sure"]["passed"] is True
    assert report["expectation"] is None
    assert report["controls_caught"]["as_B_scaled"] is True
    validate_summary(_read(tmp_path / "summary.json"))


def test_verify_lemmas_negative_control_fails(tmp_path):
    code = _cli(
        "verify-lemmas", "--problem", CANONICAL, "--trials", "10", "--kmax", "3000",
        "--negative-control", "--out", str(tmp_path),
    )
    assert code == 1
    assert _read(tmp_path / "lemmas.json")["almost_sure"]["B_used"] == pytest.approx(
        _read(tmp_path / "constants.json")["B"] * Config.NEGATIVE_B_FACTOR
    )


def test_robust_pr_cannot_run_rate_analysis(tmp_path, capsys):
    code = _cli("run", "--problem", str(CONFIGS / "robust_pr_scalar.json"), "--kmax", "10", "--out", str(tmp_path))
    assert code == 3
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "ScheduleError"
    assert "D1 diverges" in err["message"]


def test_rate_certify_refuses_failed_schedule(tmp_path, capsys):
    # 2/mu_G is about 1.68 on the canonical instance
    code = _cli(
        "rate-certify", "--problem", CANONICAL, "--beta0", "0.5", "--trials", "2", "--kmax", "500",
        "--out", str(tmp_path),
    )
    assert code == 3
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "ScheduleError"
    assert "beta0_lower" in err["failures"]
    summary = _read(tmp_path / "summary.json")
    validate_summary(summary)
    assert summary["command"] == "rate-certify"
    assert summary["certification"]["refused"] is True
    assert summary["certification"]["passed"] is False
    assert "beta0_lower" in summary["certification"]["schedule_failures"]
    assert verify_manifest(tmp_path) == []


def test_run_summary_reports_assumption_checks(tmp_path):
    code = _cli("run", "--problem", CANONICAL, "--trials", "2", "--kmax", "200", "--out", str(tmp_path))
    assert code == 0
    summary = _read(tmp_path / "summary.json")
    report = summary["assumptions"]
    assert report["problem"] == "linear_canonical"
    assert report["radius"] == 2.0
    assert all(check["passed"] for check in report["checks"])
    assert {"growth", "strong_monotonicity_F", "H_consistency"} <= {c["name"] for c in report["checks"]}
    assert summary["empirical_constants"] is None
    assert summary["certification"] is None


def test_gtd_summary_carries_empirical_constants(tmp_path):
    code = _cli(
        "run", "--problem", str(CONFIGS / "gtd_three_state.json"), "--trials", "2", "--kmax", "200",
        "--out", str(tmp_path),
    )
    assert code == 0
    summary = _read(tmp_path / "summary.json")
    validate_summary(summary)
    assert summary["constants_estimated"] is True
    est = summary["empirical_constants"]
    assert est["constants_estimated"] is True
    assert est["mu_F"] > 0.0 and est["mu_G"] > 0.0
    assert summary["assumptions"]["radius"] == 1.0


# ── exports ───────────────────────────────────────────────────────────────────


def test_finite_or_none():
    import numpy as np

    payload = {"a": float("nan"), "b": [np.float64(1.5), np.inf], "c": {"d": np.int64(3)}}
    assert finite_or_none(payload) == {"a": None, "b": [1.5, None], "c": {"d": 3}}
