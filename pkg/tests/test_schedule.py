"""Step sizes, schedule validation, mixing windows and K*."""
import math

import numpy as np
import pytest

from src.core.errors import KstarNotFoundError, ScheduleError
from src.engine.schedule import (
    StepSchedule,
    alpha,
    beta,
    compute_Kstar,
    kstar_threshold,
    tail_step_sum,
    tail_step_sums,
    tau_of,
    validate_schedule,
)
from src.engine.seeds import trial_seed, trial_seeds


@pytest.mark.parametrize(
    "schedule, k, expected",
    [
        (StepSchedule(alpha0=1.0, beta0=1.0), 0, 1.0),
        (StepSchedule(alpha0=1.0, beta0=1.0), 7, 0.25),
        (StepSchedule(alpha0=1.0, beta0=1.0), 26, 1.0 / 9.0),
    ],
)
def test_alpha_is_exact_on_cubes(schedule, k, expected):
    assert alpha(schedule, k) == expected


def test_beta():
    assert beta(StepSchedule(alpha0=1.0, beta0=2.0), 3) == 0.5


def test_vector_and_scalar_step_sizes_agree():
    s = StepSchedule(alpha0=3.0, beta0=1.7)
    ks = np.arange(50)
    np.testing.assert_array_equal(s.alphas(ks), [s.alpha(int(k)) for k in ks])
    np.testing.assert_array_equal(s.betas(ks), [s.beta(int(k)) for k in ks])


def test_schedule_rejects_nonpositive_scale():
    with pytest.raises(ValueError):
        StepSchedule(alpha0=0.0, beta0=1.0)


# ── Validation ────────────────────────────────────────────────────────────────


def test_default_family_passes_ratio_condition():
    report = validate_schedule(StepSchedule(alpha0=1.0, beta0=0.5), mu_F=1.0, mu_G=1.0, B=1.0)
    checks = {c.name: c for c in report.checks}
    assert checks["ratio"].passed
    assert checks["alpha_divergent"].passed
    assert checks["square_summable"].passed


def test_beta0_lower_bound_flags_proof_requirement():
    report = validate_schedule(StepSchedule(alpha0=2.0, beta0=1.0), mu_F=1.0, mu_G=1.0, B=1.0)
    checks = {c.name: c for c in report.checks}
    assert not checks["beta0_lower"].passed
    assert checks["beta0_lower_stated"].passed
    assert "beta0_lower" in report.failures()
    assert not report.passed


def test_fast_decaying_alpha_is_not_divergent():
    report = validate_schedule(
        StepSchedule(alpha0=1.0, beta0=2.0, alpha_exponent=1.5), mu_F=1.0, mu_G=1.0, B=1.0
    )
    assert "alpha_divergent" in report.failures()


# ── Windows ───────────────────────────────────────────────────────────────────


def test_tau_of_clips_to_k():
    assert int(tau_of(0.01, 1.0)) == math.ceil(math.log(100.0))
    assert int(tau_of(0.01, 1.0, 2)) == 2
    assert int(tau_of(2.0, 1.0)) == 0


def test_tail_step_sum_single_term():
    s = StepSchedule(alpha0=1.0, beta0=1.0)
    assert tail_step_sum(s, 7, 0) == s.alpha(7)


def test_tail_step_sum_constant_schedule():
    s = StepSchedule(alpha0=0.3, beta0=0.1, alpha_exponent=0.0)
    assert tail_step_sum(s, 10, 3) == pytest.approx(4 * 0.3)


def test_tail_step_sum_direct_summation():
    s = StepSchedule(alpha0=1.0, beta0=1.0)
    expected = 6.0 ** (-2 / 3) + 7.0 ** (-2 / 3) + 8.0 ** (-2 / 3)
    assert tail_step_sum(s, 7, 2) == pytest.approx(expected, rel=1e-14)
    np.testing.assert_allclose(tail_step_sums(s, [7], [2]), [expected], rtol=1e-13)


def test_tail_step_sum_window_before_start():
    with pytest.raises(ScheduleError):
        tail_step_sum(StepSchedule(alpha0=1.0, beta0=1.0), 2, 3)


# ── K* ────────────────────────────────────────────────────────────────────────


def test_kstar_zero_without_mixing_window():
    assert compute_Kstar(StepSchedule(alpha0=1.0, beta0=0.5), B=1.0, C=0.0, cap=100) == 0


@pytest.mark.parametrize("cap", [0, 1, 10])
def test_kstar_when_condition_never_fails(cap):
    s = StepSchedule(alpha0=0.1, beta0=0.5)
    assert compute_Kstar(s, B=1.0, C=0.0, cap=cap) == 0
    assert compute_Kstar(s, B=1.0, C=1e-9, cap=cap) == 0


def _scan_Kstar(schedule: StepSchedule, B: float, C: float, cap: int) -> int:
    threshold = min(math.log(2.0) / (2.0 * B), schedule.alpha0)

    def holds(k: int) -> bool:
        tau = min(max(math.ceil(C * math.log(1.0 / schedule.alpha(k))), 0), k)
        return tau * schedule.alpha(k - tau) <= threshold

    ok = [holds(k) for k in range(cap + 1)]
    for k in range(cap + 1):
        if all(ok[k : min(10 * (k + 1), cap) + 1]):
            return k
    raise AssertionError("no K* in range")


def test_kstar_matches_brute_force_scan():
    s = StepSchedule(alpha0=1.0, beta0=0.5)
    assert kstar_threshold(s, 1.0) == pytest.approx(math.log(2.0) / 2.0)
    assert compute_Kstar(s, B=1.0, C=1.0, cap=5000) == _scan_Kstar(s, 1.0, 1.0, 5000)


def test_kstar_not_found_reports_minimum():
    with pytest.raises(KstarNotFoundError) as exc:
        compute_Kstar(StepSchedule(alpha0=1.0, beta0=0.5), B=1e6, C=1.0, cap=100)
    assert exc.value.payload["cap"] == 100
    assert exc.value.payload["achieved_min"] > exc.value.payload["threshold"]


# ── Seeds ─────────────────────────────────────────────────────────────────────


def test_trial_seeds_are_prefix_stable():
    np.testing.assert_array_equal(trial_seeds(7, 3), trial_seeds(7, 10)[:3])
    assert trial_seeds(7, 2, start=5)[0] == trial_seed(7, 5)
    assert len(set(trial_seeds(7, 100).tolist())) == 100
