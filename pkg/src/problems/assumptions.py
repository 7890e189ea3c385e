"""
Sampled checks of the structural assumptions a problem claims: operator growth,
per-sample Lipschitz continuity, strong monotonicity of F̄ in x, one-point strong
monotonicity of Ḡ(H(·), ·) at y*, and F̄(H(y), y) = 0.

Each check draws points uniformly from a ball and reports the worst margin
(right side minus left side, so a negative margin is a violation).
"""
from __future__ import annotations

import numpy as np
from pydantic import BaseModel

from src.core.kernels import norm, rowdot, sq_norm
from src.core.logger import setup_logger
from src.problems.constants import noise_states, uniform_ball
from src.problems.spec import ProblemSpec

logger = setup_logger("problems")

REL_TOL = 1e-9


class AssumptionCheck(BaseModel):
    name: str
    passed: bool
    worst_margin: float
    samples: int
    detail: str = ""


class AssumptionReport(BaseModel):
    problem: str
    radius: float
    checks: list[AssumptionCheck]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]


def _check(name: str, margins: np.ndarray, scale: np.ndarray, detail: str = "") -> AssumptionCheck:
    worst = float(margins.min())
    ok = bool(np.all(margins >= -REL_TOL * np.maximum(scale, 1.0)))
    return AssumptionCheck(name=name, passed=ok, worst_margin=worst, samples=int(margins.size), detail=detail)


def _repeat(state, n: int) -> np.ndarray:
    return np.repeat(np.asarray(state)[None], n, axis=0)


def check_growth(spec: ProblemSpec, B: float, radius: float, samples: int, rng) -> AssumptionCheck:
    """‖F(x,y,ξ)‖, ‖G(x,y,ξ)‖ ≤ B(‖x‖ + ‖y‖ + 1)."""
    states, _ = noise_states(spec, seed=int(rng.integers(2**31)))
    z = uniform_ball(rng, samples, spec.d_x + spec.d_y, radius)
    x, y = z[:, : spec.d_x], z[:, spec.d_x :]
    rhs = B * (norm(x) + norm(y) + 1.0)
    margins = []
    for s in states:
        xi = _repeat(s, samples)
        lhs = np.maximum(norm(spec.F_fn(x, y, xi)), norm(spec.G_fn(x, y, xi)))
        margins.append(rhs - lhs)
    m = np.concatenate(margins)
    return _check("growth", m, np.tile(rhs, len(states)), f"B = {B:.6g}")


def check_lipschitz(spec: ProblemSpec, radius: float, samples: int, rng) -> list[AssumptionCheck]:
    states, _ = noise_states(spec, seed=int(rng.integers(2**31)))
    z1 = uniform_ball(rng, samples, spec.d_x + spec.d_y, radius)
    z2 = uniform_ball(rng, samples, spec.d_x + spec.d_y, radius)
    x1, y1 = z1[:, : spec.d_x], z1[:, spec.d_x :]
    x2, y2 = z2[:, : spec.d_x], z2[:, spec.d_x :]
    gap = norm(x1 - x2) + norm(y1 - y2)
    out = []
    for label, fn, L in (("lipschitz_F", spec.F_fn, spec.L_F), ("lipschitz_G", spec.G_fn, spec.L_G)):
        margins = []
        for s in states:
            xi = _repeat(s, samples)
            margins.append(L * gap - norm(fn(x1, y1, xi) - fn(x2, y2, xi)))
        out.append(_check(label, np.concatenate(margins), np.tile(L * gap, len(states)), f"L = {L:.6g}"))
    return out


def check_strong_monotonicity(spec: ProblemSpec, radius: float, samples: int, rng) -> AssumptionCheck:
    """⟨x − z, F̄(x,y) − F̄(z,y)⟩ ≥ μ_F‖x − z‖²."""
    spec.require("mean_F")
    x = uniform_ball(rng, samples, spec.d_x, radius)
    z = uniform_ball(rng, samples, spec.d_x, radius)
    y = uniform_ball(rng, samples, spec.d_y, radius)
    diff = x - z
    lhs = rowdot(diff, spec.mean_F_fn(x, y) - spec.mean_F_fn(z, y))
    rhs = spec.mu_F * sq_norm(diff)
    return _check("strong_monotonicity_F", lhs - rhs, rhs, f"mu_F = {spec.mu_F:.6g}")


def check_one_point_monotonicity(spec: ProblemSpec, radius: float, samples: int, rng) -> AssumptionCheck:
    """⟨y − y*, Ḡ(H(y), y)⟩ ≥ μ_G‖y − y*‖²."""
    spec.require("mean_G")
    spec.require("H")
    y = spec.y_star + uniform_ball(rng, samples, spec.d_y, radius)
    diff = y - spec.y_star
    lhs = rowdot(diff, spec.mean_G_fn(spec.H_fn(y), y))
    rhs = spec.mu_G * sq_norm(diff)
    return _check("one_point_monotonicity_G", lhs - rhs, rhs, f"mu_G = {spec.mu_G:.6g}")


def check_H_consistency(spec: ProblemSpec, radius: float, samples: int, rng) -> AssumptionCheck:
    """F̄(H(y), y) = 0; the margin is −‖F̄(H(y), y)‖ relative to the scale of y."""
    spec.require("mean_F")
    spec.require("H")
    y = uniform_ball(rng, samples, spec.d_y, radius)
    residual = norm(spec.mean_F_fn(spec.H_fn(y), y))
    scale = norm(y) + 1.0
    ok = residual <= 1e-8 * scale
    return AssumptionCheck(
        name="H_consistency",
        passed=bool(ok.all()),
        worst_margin=float(-residual.max()),
        samples=samples,
    )


def check_assumptions(
    spec: ProblemSpec,
    B: float,
    radius: float = 2.0,
    samples: int = 500,
    seed: int = 0,
) -> AssumptionReport:
    """Run every check the problem's capabilities allow."""
    rng = np.random.default_rng(seed)
    checks = [check_growth(spec, B, radius, samples, rng), *check_lipschitz(spec, radius, samples, rng)]
    if spec.has_means:
        checks.append(check_strong_monotonicity(spec, radius, samples, rng))
        if spec.has_residuals:
            checks.append(check_one_point_monotonicity(spec, radius, samples, rng))
            checks.append(check_H_consistency(spec, radius, samples, rng))
    report = AssumptionReport(problem=spec.name, radius=radius, checks=checks)
    if not report.passed:
        logger.warning(f"{spec.name}: assumption checks failed: {report.failures()}")
    return report
