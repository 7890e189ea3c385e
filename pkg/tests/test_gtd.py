"""Nonlinear gradient TD problem on a three-state chain."""
import json

import numpy as np
import pytest

from src.core.errors import ProblemConfigError
from src.problems import build_problem, parse_problem
from tests.conftest import CONFIGS


def _raw() -> dict:
    return json.loads((CONFIGS / "gtd_three_state.json").read_text(encoding="utf-8"))


def test_builds_with_estimated_constants(gtd):
    assert gtd.d_x == gtd.d_y == 2
    assert gtd.constants_estimated
    assert gtd.mu_F > 0.0 and gtd.mu_G > 0.0
    assert gtd.noise.n_states == 9
    np.testing.assert_allclose(gtd.notes["pair_weights"].sum(), 1.0)
    est = gtd.notes["empirical_constants"]
    assert est.constants_estimated
    assert (gtd.mu_F, gtd.mu_G) == (est.mu_F, est.mu_G)
    assert (gtd.L_F, gtd.L_G, gtd.L_H) == (est.L_F, est.L_G, est.L_H)


def test_fixed_point_is_a_zero_of_both_means(gtd):
    np.testing.assert_allclose(gtd.mean_F(gtd.x_star, gtd.y_star), 0.0, atol=1e-10)
    np.testing.assert_allclose(gtd.mean_G(gtd.x_star, gtd.y_star), 0.0, atol=1e-10)


@pytest.mark.parametrize("y", [[0.0, 0.0], [0.5, -0.3], [-1.0, 2.0]])
def test_H_solves_fast_equation(gtd, y):
    y = np.asarray(y)
    np.testing.assert_allclose(gtd.mean_F(gtd.H(y), y), 0.0, atol=1e-10)


def test_sampled_operators_average_to_means(gtd):
    # i.i.d. transitions drawn from the stationary pair law
    rng = np.random.default_rng(2024)
    n = 20_000
    weights = gtd.notes["pair_weights"]
    xi = rng.choice(len(weights), size=n, p=weights)
    x = np.tile([0.4, -0.2], (n, 1))
    y = np.tile([0.1, 0.3], (n, 1))
    for sample, exact in ((gtd.F_fn, gtd.mean_F), (gtd.G_fn, gtd.mean_G)):
        draws = sample(x, y, xi)
        se = draws.std(axis=0, ddof=1) / np.sqrt(n)
        gap = np.abs(draws.mean(axis=0) - exact(x[0], y[0]))
        assert np.all(gap <= 4.0 * se + 1e-12)


def test_linear_value_function_without_curvature():
    raw = _raw()
    raw["epsilon"] = 0.0
    spec = build_problem(parse_problem(raw))
    # with ε = 0 the slow operator does not depend on the curvature terms
    y = np.array([0.2, -0.1])
    x = spec.H(y)
    for s in spec.noise.enumerate_states():
        g = spec.sample_G(x, y, s)
        z, z_next = spec.notes["pairs"][s]
        phi = np.asarray(raw["features"])
        expected = -(phi[z] - raw["gamma"] * phi[z_next]) * (phi[z] @ x)
        np.testing.assert_allclose(g, expected, atol=1e-12)


def test_discount_must_be_below_one():
    raw = _raw()
    raw["gamma"] = 1.0
    with pytest.raises(ProblemConfigError) as exc:
        build_problem(parse_problem(raw))
    assert exc.value.payload["field"] == "gamma"


def test_curvature_must_be_symmetric():
    raw = _raw()
    raw["curvature"][0] = [[1.0, 0.5], [0.0, 1.0]]
    with pytest.raises(ProblemConfigError) as exc:
        build_problem(parse_problem(raw))
    assert exc.value.payload["field"] == "curvature"


def test_rewards_length_checked():
    raw = _raw()
    raw["rewards"] = [1.0, 0.0]
    with pytest.raises(ProblemConfigError) as exc:
        build_problem(parse_problem(raw))
    assert exc.value.payload["field"] == "rewards"
