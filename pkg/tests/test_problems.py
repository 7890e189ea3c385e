"""Linear and regression problem builders, constants and assumption checks."""
import numpy as np
import pytest

from src.core.errors import MissingCapabilityError, NoiseNotEnumerableError, ProblemConfigError
from src.noise.chain import stationary_distribution
from src.problems import (
    build_problem,
    estimate_B,
    load_problem,
    mean_exact,
    parse_problem,
)
from src.problems.assumptions import check_assumptions
from src.problems.constants import empirical_constants, noise_states, sampled_mu_F
from src.problems.schemas import RobustPRConfig
from tests.conftest import CONFIGS, TWO_STATE_P, scalar_linear_config


def test_canonical_moduli(canonical):
    assert canonical.mu_F == pytest.approx(1.5)
    assert canonical.mu_G == pytest.approx(1.5 - 1.0 / 3.25, rel=1e-10)
    np.testing.assert_allclose(canonical.x_star, 0.0, atol=1e-12)
    np.testing.assert_allclose(canonical.y_star, 0.0, atol=1e-12)


def test_canonical_H_solves_fast_equation(canonical):
    A11 = np.array([[2.0, 0.5], [-0.5, 1.5]])
    y = np.array([0.3, -1.2])
    np.testing.assert_allclose(canonical.H(y), -np.linalg.solve(A11, y), atol=1e-12)
    np.testing.assert_allclose(canonical.mean_F(canonical.H(y), y), 0.0, atol=1e-12)


def test_canonical_B_is_fast_lipschitz_constant(canonical):
    B = estimate_B(canonical)
    L_F = np.linalg.norm(np.array([[2.0, 0.5, 1.0, 0.0], [-0.5, 1.5, 0.0, 1.0]]), 2)
    assert B.value == pytest.approx(L_F, rel=1e-12)
    assert B.value == pytest.approx(2.2989, abs=1e-3)
    assert B.terms["F_origin"] == pytest.approx(np.hypot(0.6, 0.3))
    assert not B.sampled


def test_canonical_noise_is_bias_table(canonical):
    x = np.array([0.2, -0.4])
    y = np.array([1.0, 0.5])
    states = canonical.noise.enumerate_states()
    b_F = canonical.notes["b_F"]
    for s in states:
        psi = canonical.sample_F(x, y, s) - canonical.mean_F(x, y)
        np.testing.assert_allclose(psi, b_F[s], atol=1e-12)
    pi = stationary_distribution(canonical.noise.chain)
    np.testing.assert_allclose(pi @ b_F, 0.0, atol=1e-12)


def test_mean_exact_agrees_with_closed_form(canonical):
    x = np.array([0.7, 0.1])
    y = np.array([-0.3, 0.9])
    np.testing.assert_allclose(mean_exact(canonical, "F", x, y), canonical.mean_F(x, y), atol=1e-12)
    np.testing.assert_allclose(mean_exact(canonical, "G", x, y), canonical.mean_G(x, y), atol=1e-12)
    with pytest.raises(ValueError):
        mean_exact(canonical, "K", x, y)


def test_canonical_assumptions_hold(canonical):
    report = check_assumptions(canonical, estimate_B(canonical).value, samples=300)
    assert report.passed, report.failures()
    names = {c.name for c in report.checks}
    assert {"growth", "lipschitz_F", "lipschitz_G", "strong_monotonicity_F", "H_consistency"} <= names


def test_growth_check_fails_with_small_B(canonical):
    report = check_assumptions(canonical, 0.1, samples=100)
    assert "growth" in report.failures()


def test_sampled_mu_F_bounded_by_exact_modulus(canonical):
    rng = np.random.default_rng(3)
    centre = np.array([0.5, -0.5])
    est = sampled_mu_F(canonical.mean_F_fn, centre, centre, 1.0, 400, rng)
    assert est >= canonical.mu_F - 1e-9
    assert est == pytest.approx(canonical.mu_F, rel=0.2)


def test_empirical_constants_bracket_closed_form(canonical):
    states, sampled = noise_states(canonical)
    assert not sampled
    est = empirical_constants(
        F=canonical.F_fn,
        G=canonical.G_fn,
        mean_F=canonical.mean_F_fn,
        mean_G=canonical.mean_G_fn,
        H=canonical.H_fn,
        states=states,
        x_star=canonical.x_star,
        y_star=canonical.y_star,
        radius=1.0,
        samples=400,
        rng=np.random.default_rng(4),
    )
    assert est.constants_estimated
    assert est.mu_F >= canonical.mu_F - 1e-9
    assert est.mu_G >= canonical.mu_G - 1e-9
    for name in ("L_F", "L_G", "L_H"):
        assert 0.0 < getattr(est, name) <= getattr(canonical, name) * (1 + 1e-9)


def test_offsets_move_the_fixed_point():
    spec = build_problem(scalar_linear_config(c_F=[1.0], c_G=[-1.0]))
    # 2x + y + 1 = 0, x + y - 1 = 0
    np.testing.assert_allclose(spec.x_star, [-2.0])
    np.testing.assert_allclose(spec.y_star, [3.0])
    np.testing.assert_allclose(spec.mean_F(spec.H(spec.y_star), spec.y_star), 0.0, atol=1e-12)


# ── Config errors ─────────────────────────────────────────────────────────────


def test_bias_table_must_average_to_zero():
    with pytest.raises(ProblemConfigError) as exc:
        build_problem(scalar_linear_config(b_F=[[1.0], [0.5]]))
    assert exc.value.payload["field"] == "b_F"


def test_fast_matrix_must_be_positive_definite():
    with pytest.raises(ProblemConfigError) as exc:
        build_problem(scalar_linear_config(A11=[[-1.0]]))
    assert exc.value.payload["field"] == "A11"


def test_schur_complement_must_be_positive_definite():
    # Δ = 1 − 1·(1/2)·4 = −1
    with pytest.raises(ProblemConfigError) as exc:
        build_problem(scalar_linear_config(A12=[[4.0]]))
    assert exc.value.payload["field"] == "A22"


def test_matrix_shapes_checked():
    with pytest.raises(ProblemConfigError) as exc:
        build_problem(scalar_linear_config(A12=[[1.0, 0.0]]))
    assert exc.value.payload["field"] == "A12"


def test_parse_names_the_offending_field():
    with pytest.raises(ProblemConfigError) as exc:
        parse_problem(
            {
                "kind": "gtd",
                "chain": {"P": TWO_STATE_P},
                "rewards": [1.0, 0.0],
                "gamma": -1.0,
                "features": [[1.0], [0.5]],
                "curvature": [[[1.0]], [[0.0]]],
            }
        )
    assert exc.value.payload["field"].endswith("gamma")


def test_unknown_kind_rejected():
    with pytest.raises(ProblemConfigError):
        parse_problem({"kind": "quadratic"})


def test_missing_config_file(tmp_path):
    with pytest.raises(ProblemConfigError) as exc:
        load_problem(tmp_path / "nope.json")
    assert exc.value.payload["field"] == "problem"


def test_invalid_json_file(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(ProblemConfigError):
        load_problem(path)


# ── Regression on autoregressive data ─────────────────────────────────────────


def test_scalar_regression_problem():
    spec = load_problem(CONFIGS / "robust_pr_scalar.json")
    np.testing.assert_allclose(spec.x_star, [0.3])
    np.testing.assert_allclose(spec.y_star, [0.3])
    assert spec.mu_G == pytest.approx(2.0)
    assert spec.constants_estimated
    np.testing.assert_allclose(spec.H([0.7]), [0.7])


def test_regression_gradient_matches_closed_form_mean():
    spec = load_problem(CONFIGS / "robust_pr_d10.json")
    rng = np.random.default_rng(5)
    n = 40_000
    states = spec.noise.initial_states([rng] * n)
    x = np.zeros((n, spec.d_x))
    y = np.tile(np.linspace(-0.5, 0.5, spec.d_y), (n, 1))
    g = spec.G_fn(x, y, states)
    se = g.std(axis=0, ddof=1) / np.sqrt(n)
    assert np.all(np.abs(g.mean(axis=0) - spec.mean_G(x[0], y[0])) <= 4.0 * se + 1e-12)


def test_regression_noise_is_not_enumerable():
    spec = load_problem(CONFIGS / "robust_pr_scalar.json")
    with pytest.raises(NoiseNotEnumerableError):
        mean_exact(spec, "F", [0.0], [0.0])


def test_unsupported_loss():
    cfg = RobustPRConfig(subdiagonal=[], x_true=[1.0], loss="huber")
    with pytest.raises(ProblemConfigError) as exc:
        build_problem(cfg)
    assert exc.value.payload["field"] == "loss"


def test_capability_missing_is_reported(canonical):
    from dataclasses import replace

    bare = replace(canonical, H_fn=None)
    with pytest.raises(MissingCapabilityError):
        bare.H([0.0, 0.0])
    assert not bare.has_residuals
