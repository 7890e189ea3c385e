"""Lemma checks on simulated ensembles, including corrupted-constant controls."""
from dataclasses import replace

import numpy as np
import pytest

from src.analysis.bounds import compute_constants
from src.analysis.lemmas import (
    MIN_EXPECTATION_TRIALS,
    check_as_lemmas,
    check_expectation_lemmas,
    negative_controls,
)
from src.core.config import Config
from src.core.errors import InsufficientTrialsError, MissingCapabilityError, MissingLagError
from src.engine.iteration import checkpoint_grid, run_ensemble, with_successors
from src.engine.seeds import trial_seeds


@pytest.fixture(scope="module")
def constants(canonical):
    return compute_constants(canonical, canonical.config.schedule, d1_terms=100_000)


@pytest.fixture(scope="module")
def small_ensemble(canonical, constants):
    k_max = 20_000
    grid = checkpoint_grid(k_max, 40, extra=[constants.Kstar])
    return run_ensemble(
        canonical, canonical.config.schedule, k_max, trial_seeds(17, 10), grid, C=constants.C
    )


@pytest.fixture(scope="module")
def lemma_points(constants):
    K = constants.Kstar
    return [K, 2 * K, 4 * K]


@pytest.fixture(scope="module")
def large_ensemble(canonical, constants, lemma_points):
    k_max = 5 * constants.Kstar
    grid = checkpoint_grid(k_max, 30, extra=with_successors(lemma_points))
    return run_ensemble(
        canonical,
        canonical.config.schedule,
        k_max,
        trial_seeds(23, MIN_EXPECTATION_TRIALS * 2),
        grid,
        C=constants.C,
    )


# ── Almost-sure checks ────────────────────────────────────────────────────────


def test_as_lemmas_hold_on_canonical(canonical, constants, small_ensemble):
    report = check_as_lemmas(canonical, small_ensemble, constants, canonical.config.schedule)
    assert report.passed, report.failures()
    assert report.pass_rate == 1.0
    names = set(report.to_frame()["inequality"])
    assert {"growth_F", "drift_z_lagged", "drift_zhat_squared", "psi_bound", "zeta_bound"} <= names
    assert all(r.k >= constants.Kstar for r in report.rows)


def test_scaled_down_B_is_caught(canonical, constants, small_ensemble):
    report = check_as_lemmas(
        canonical, small_ensemble, constants, canonical.config.schedule, B_factor=Config.NEGATIVE_B_FACTOR
    )
    assert report.negative_control
    assert not report.passed
    assert "growth_F" in {name for name, _ in report.failures()}


def test_noise_free_fixed_point_has_positive_margins(noise_free):
    sched = noise_free.config.schedule
    constants = compute_constants(noise_free, sched, d1_terms=100_000)
    k_max = constants.Kstar + 50
    ens = run_ensemble(
        noise_free,
        sched,
        k_max,
        trial_seeds(1, 2),
        checkpoint_grid(k_max, 10, extra=[constants.Kstar]),
        C=constants.C,
        x0=noise_free.x_star,
        y0=noise_free.y_star,
    )
    report = check_as_lemmas(noise_free, ens, constants, sched)
    assert report.passed
    assert min(r.worst_margin for r in report.rows) > 0.0


def test_checks_need_lagged_states(canonical, constants):
    sched = canonical.config.schedule
    k_max = constants.Kstar + 10
    ens = run_ensemble(canonical, sched, k_max, trial_seeds(2, 2))
    with pytest.raises(MissingLagError):
        check_as_lemmas(canonical, ens, constants, sched)


def test_nothing_to_check_before_Kstar(canonical, constants):
    sched = canonical.config.schedule
    ens = run_ensemble(canonical, sched, constants.Kstar - 1, trial_seeds(2, 2), C=constants.C)
    report = check_as_lemmas(canonical, ens, constants, sched)
    assert report.rows == [] and report.passed


def test_checks_need_H(canonical, constants, small_ensemble):
    with pytest.raises(MissingCapabilityError):
        check_as_lemmas(
            replace(canonical, H_fn=None), small_ensemble, constants, canonical.config.schedule
        )


# ── Expectation checks ────────────────────────────────────────────────────────


def test_expectation_checks_need_enough_trials(canonical, constants, small_ensemble):
    with pytest.raises(InsufficientTrialsError) as exc:
        check_expectation_lemmas(
            canonical, small_ensemble, constants, canonical.config.schedule, [constants.Kstar]
        )
    assert exc.value.payload["required"] == MIN_EXPECTATION_TRIALS


def test_expectation_lemmas_hold(canonical, constants, large_ensemble, lemma_points):
    report = check_expectation_lemmas(
        canonical, large_ensemble, constants, canonical.config.schedule, lemma_points
    )
    assert report.passed, report.failures()
    frame = report.to_frame()
    assert set(frame["lemma"]) == {"fast_residual_recursion", "slow_residual_recursion", "residual_log_bound"}
    log_rows = frame[frame["lemma"] == "residual_log_bound"]
    assert (log_rows["rhs"] == constants.log_D).all()
    assert np.all(log_rows["lhs"] < log_rows["rhs"])


def test_expectation_checks_need_successor_checkpoints(canonical, constants, large_ensemble):
    missing = int(large_ensemble.ks[-1])
    with pytest.raises(ValueError):
        check_expectation_lemmas(
            canonical, large_ensemble, constants, canonical.config.schedule, [missing]
        )


def test_negative_controls_are_caught(canonical, constants, large_ensemble, lemma_points):
    caught = negative_controls(
        canonical, large_ensemble, constants, canonical.config.schedule, lemma_points
    )
    assert caught == {"as_B_scaled": True, "fast_recursion_mu_F_scaled": True}
