"""
Problem constants: exact stationary means, the growth constant B, and
sampled estimates of Lipschitz and monotonicity moduli for problems where
they are not available in closed form.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from pydantic import BaseModel

from src.core.errors import NoiseNotEnumerableError
from src.core.kernels import norm, rowdot, sq_norm
from src.core.logger import setup_logger
from src.problems.spec import ProblemSpec, SampleFn, stationary_mean

logger = setup_logger("problems")


def uniform_ball(rng: np.random.Generator, n: int, d: int, radius: float) -> np.ndarray:
    """n points uniform in the d-ball of the given radius."""
    g = rng.standard_normal((n, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = radius * rng.random(n) ** (1.0 / d)
    return g * r[:, None]


def noise_states(spec: ProblemSpec, samples: int = 4096, seed: int = 0) -> tuple[np.ndarray, bool]:
    """All noise states when enumerable, else stationary draws; second item flags sampling."""
    if spec.noise.enumerable:
        return spec.noise.enumerate_states(), False
    rng = np.random.default_rng(seed)
    return spec.noise.initial_states([rng] * samples), True


def mean_exact(spec: ProblemSpec, which: str, x, y) -> np.ndarray:
    """Σ_ξ π(ξ)·sample(x, y, ξ) over the enumerable noise states."""
    if not spec.noise.enumerable:
        raise NoiseNotEnumerableError(
            f"noise source of {spec.name!r} is not enumerable; use a Monte Carlo estimate"
        )
    fn = {"F": spec.F_fn, "G": spec.G_fn}.get(which)
    if fn is None:
        raise ValueError(f"which must be 'F' or 'G', got {which!r}")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim == 1:
        return stationary_mean(fn, spec.noise, x[None], y[None])[0]
    return stationary_mean(fn, spec.noise, x, y)


# ── B ─────────────────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class BEstimate:
    """The growth constant B with the terms it is the max of."""

    value: float
    terms: dict[str, float] = field(default_factory=dict)
    sampled: bool = False

    def __float__(self) -> float:
        return self.value


def estimate_B(spec: ProblemSpec, region: float | None = None, seed: int = 0) -> BEstimate:
    """
    B = max{max_ξ‖F(0,0,ξ)‖, max_ξ‖G(0,0,ξ)‖, ‖F̄(0,0)‖, ‖Ḡ(0,0)‖, L_F, L_G, L_H}.

    When *region* is given and the problem's moduli are sampled estimates, they are
    re-estimated on the ball of that radius.
    """
    states, sampled = noise_states(spec, seed=seed)
    if sampled:
        logger.warning(f"{spec.name}: noise space not enumerable, B uses a sampled sup")
    n = len(states)
    x0 = np.zeros((n, spec.d_x))
    y0 = np.zeros((n, spec.d_y))
    terms = {
        "F_origin": float(norm(spec.F_fn(x0, y0, states)).max()),
        "G_origin": float(norm(spec.G_fn(x0, y0, states)).max()),
    }
    if spec.has_means:
        terms["mean_F_origin"] = float(np.linalg.norm(spec.mean_F(np.zeros(spec.d_x), np.zeros(spec.d_y))))
        terms["mean_G_origin"] = float(np.linalg.norm(spec.mean_G(np.zeros(spec.d_x), np.zeros(spec.d_y))))
    L_F, L_G, L_H = spec.L_F, spec.L_G, spec.L_H
    if region is not None and spec.constants_estimated:
        rng = np.random.default_rng(seed)
        L_F = max(L_F, sampled_lipschitz(spec.F_fn, states, spec.d_x, spec.d_y, region, 2000, rng))
        L_G = max(L_G, sampled_lipschitz(spec.G_fn, states, spec.d_x, spec.d_y, region, 2000, rng))
        if spec.H_fn is not None:
            L_H = max(L_H, sampled_lipschitz_H(spec.H_fn, spec.d_y, region, 2000, rng))
    terms.update(L_F=L_F, L_G=L_G, L_H=L_H)
    return BEstimate(value=max(terms.values()), terms=terms, sampled=sampled or spec.constants_estimated)


# ── Sampled moduli ────────────────────────────────────────────────────────────


def sampled_lipschitz(
    fn: SampleFn,
    states: np.ndarray,
    d_x: int,
    d_y: int,
    radius: float,
    samples: int,
    rng: np.random.Generator,
) -> float:
    """max over pairs and states of ‖fn(z₁,ξ) − fn(z₂,ξ)‖ / (‖x₁−x₂‖ + ‖y₁−y₂‖)."""
    z1 = uniform_ball(rng, samples, d_x + d_y, radius)
    z2 = uniform_ball(rng, samples, d_x + d_y, radius)
    x1, y1 = z1[:, :d_x], z1[:, d_x:]
    x2, y2 = z2[:, :d_x], z2[:, d_x:]
    denom = norm(x1 - x2) + norm(y1 - y2)
    worst = 0.0
    for s in states:
        xi = np.repeat(np.asarray(s)[None], samples, axis=0)
        diff = norm(fn(x1, y1, xi) - fn(x2, y2, xi))
        worst = max(worst, float((diff / denom).max()))
    return worst


def sampled_lipschitz_H(H, d_y: int, radius: float, samples: int, rng: np.random.Generator) -> float:
    y1 = uniform_ball(rng, samples, d_y, radius)
    y2 = uniform_ball(rng, samples, d_y, radius)
    return float((norm(H(y1) - H(y2)) / norm(y1 - y2)).max())


def sampled_mu_F(
    mean_F, x_center: np.ndarray, y_center: np.ndarray, radius: float, samples: int, rng: np.random.Generator
) -> float:
    """min of ⟨x − z, F̄(x,y) − F̄(z,y)⟩ / ‖x − z‖² over random (x, z, y) around the centers."""
    d_x, d_y = len(x_center), len(y_center)
    x = x_center + uniform_ball(rng, samples, d_x, radius)
    z = x_center + uniform_ball(rng, samples, d_x, radius)
    y = y_center + uniform_ball(rng, samples, d_y, radius)
    diff = x - z
    return float((rowdot(diff, mean_F(x, y) - mean_F(z, y)) / sq_norm(diff)).min())


def sampled_mu_G(
    mean_G, H, y_star: np.ndarray, d_y: int, radius: float, samples: int, rng: np.random.Generator
) -> float:
    """min of ⟨y − y*, Ḡ(H(y), y)⟩ / ‖y − y*‖² over random y around y*."""
    y = y_star + uniform_ball(rng, samples, d_y, radius)
    diff = y - y_star
    return float((rowdot(diff, mean_G(H(y), y)) / sq_norm(diff)).min())


# ── Region estimates ──────────────────────────────────────────────────────────


class EmpiricalConstants(BaseModel):
    """Moduli sampled on a ball around the fixed point instead of derived in closed form."""

    radius: float
    samples: int
    mu_F: float
    mu_G: float
    L_F: float
    L_G: float
    L_H: float
    constants_estimated: bool = True


def empirical_constants(
    *,
    F: SampleFn,
    G: SampleFn,
    mean_F,
    mean_G,
    H,
    states: np.ndarray,
    x_star: np.ndarray,
    y_star: np.ndarray,
    radius: float,
    samples: int,
    rng: np.random.Generator,
) -> EmpiricalConstants:
    """
    Monotonicity moduli on the ball of *radius* around (x*, y*); Lipschitz
    constants on the origin-centred ball that contains it.
    """
    d_x, d_y = len(x_star), len(y_star)
    outer = radius + float(np.linalg.norm(np.concatenate([x_star, y_star])))
    return EmpiricalConstants(
        radius=radius,
        samples=samples,
        mu_F=sampled_mu_F(mean_F, x_star, y_star, radius, samples, rng),
        mu_G=sampled_mu_G(mean_G, H, y_star, d_y, radius, samples, rng),
        L_F=sampled_lipschitz(F, states, d_x, d_y, outer, samples, rng),
        L_G=sampled_lipschitz(G, states, d_x, d_y, outer, samples, rng),
        L_H=sampled_lipschitz_H(H, d_y, outer, samples, rng),
    )
