"""
Gradient temporal-difference learning with a smooth nonlinear value function

    V_y(ζ) = ⟨y, φ₀(ζ)⟩ + (ε/2)⟨y, M(ζ) y⟩,
    ∇V_y(ζ) = φ₀(ζ) + ε M(ζ) y,   ∇²V_y(ζ) = ε M(ζ).

The ascent-form updates are negated into the descent form x ← x − αF, y ← y − βG.
The noise state is an index into the chain of transition pairs (ζ, ζ′), so one
step of the iteration consumes one observed transition.
"""
from __future__ import annotations

import numpy as np
from scipy.optimize import root

from src.core.errors import ProblemConfigError
from src.core.kernels import batched_matvec, rowdot
from src.core.logger import setup_logger
from src.noise.chain import FiniteChain, pair_chain, stationary_distribution
from src.noise.sources import FiniteChainSource
from src.problems.constants import empirical_constants, uniform_ball
from src.problems.schemas import GTDConfig
from src.problems.spec import ProblemSpec, stationary_mean

logger = setup_logger("problems")


class GTDModel:
    """Closed-form value function, TD error and the two GTD operators."""

    def __init__(self, cfg: GTDConfig, pairs: np.ndarray) -> None:
        self.phi0 = np.asarray(cfg.features, dtype=float)
        self.M = np.asarray(cfg.curvature, dtype=float)
        self.r = np.asarray(cfg.rewards, dtype=float)
        self.gamma = float(cfg.gamma)
        self.eps = float(cfg.epsilon)
        self.pairs = pairs

    def value_and_grad(self, y: np.ndarray, states: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        My = batched_matvec(self.M[states], y)
        phi0 = self.phi0[states]
        value = rowdot(y, phi0) + 0.5 * self.eps * rowdot(y, My)
        return value, phi0 + self.eps * My

    def td_terms(self, x, y, xi):
        z, z_next = self.pairs[xi, 0], self.pairs[xi, 1]
        v, phi = self.value_and_grad(y, z)
        v_next, phi_next = self.value_and_grad(y, z_next)
        delta = self.r[z] + self.gamma * v_next - v
        c = delta - rowdot(phi, x)
        return z, phi, phi_next, delta, c

    def F(self, x, y, xi):
        _, phi, _, _, c = self.td_terms(x, y, xi)
        return -c[:, None] * phi

    def G(self, x, y, xi):
        z, phi, phi_next, _, c = self.td_terms(x, y, xi)
        h = (c * self.eps)[:, None] * batched_matvec(self.M[z], x)
        return -((phi - self.gamma * phi_next) * rowdot(phi, x)[:, None] - h)


def _validate(cfg: GTDConfig, n: int) -> None:
    if not cfg.gamma < 1.0:
        raise ProblemConfigError(f"discount gamma must be < 1, got {cfg.gamma}", field="gamma")
    if len(cfg.rewards) != n:
        raise ProblemConfigError(f"rewards needs {n} entries", field="rewards")
    phi0 = np.asarray(cfg.features, dtype=float)
    if phi0.ndim != 2 or phi0.shape[0] != n:
        raise ProblemConfigError(f"features must be {n} x m", field="features")
    m = phi0.shape[1]
    M = np.asarray(cfg.curvature, dtype=float)
    if M.shape != (n, m, m):
        raise ProblemConfigError(f"curvature must be {n} x {m} x {m}", field="curvature")
    if not np.allclose(M, np.swapaxes(M, 1, 2), atol=1e-12):
        raise ProblemConfigError("curvature matrices must be symmetric", field="curvature")


def make_gtd(cfg: GTDConfig) -> ProblemSpec:
    chain = FiniteChain.from_config(cfg.chain)
    chain.require_ergodic()
    _validate(cfg, chain.n)
    pchain, pairs = pair_chain(chain)
    source = FiniteChainSource(pchain)
    model = GTDModel(cfg, pairs)
    m = model.phi0.shape[1]

    # pair weights π(ζ)P(ζ, ζ′) in closed form
    pi = stationary_distribution(chain)
    weights = pi[pairs[:, 0]] * chain.P[pairs[:, 0], pairs[:, 1]]

    def mean_F(x, y):
        return stationary_mean(model.F, source, x, y)

    def mean_G(x, y):
        return stationary_mean(model.G, source, x, y)

    def H(y):
        # F̄(x, y) = Φ(y) x − E[δφ], so H(y) = Φ(y)⁻¹ E[δφ]
        n = y.shape[0]
        Phi = np.zeros((n, m, m))
        b = np.zeros((n, m))
        for w, p in zip(weights, range(len(pairs)), strict=True):
            xi = np.full(n, p)
            _, phi, _, delta, _ = model.td_terms(np.zeros((n, m)), y, xi)
            Phi = Phi + w * phi[:, :, None] * phi[:, None, :]
            b = b + (w * delta)[:, None] * phi
        return np.linalg.solve(Phi, b[:, :, None])[:, :, 0]

    # linear TD solution as the starting point for the nonlinear fixed point
    phi_z = model.phi0[pairs[:, 0]]
    phi_zn = model.phi0[pairs[:, 1]]
    A_td = (weights[:, None, None] * phi_z[:, :, None] * (phi_z - cfg.gamma * phi_zn)[:, None, :]).sum(0)
    b_td = (weights[:, None] * model.r[pairs[:, 0], None] * phi_z).sum(0)
    y_lin, *_ = np.linalg.lstsq(A_td, b_td, rcond=None)

    def slow_residual(y):
        y2 = y[None]
        return mean_G(H(y2), y2)[0]

    sol = root(slow_residual, y_lin, tol=1e-13)
    if not sol.success or np.linalg.norm(slow_residual(sol.x)) > 1e-10:
        raise ProblemConfigError(f"GTD fixed point not found: {sol.message}", field="epsilon")
    y_star = sol.x
    x_star = H(y_star[None])[0]

    rng = np.random.default_rng(cfg.estimation_seed)
    radius = cfg.region_radius
    samples = cfg.estimation_samples
    est = empirical_constants(
        F=model.F,
        G=model.G,
        mean_F=mean_F,
        mean_G=mean_G,
        H=H,
        states=source.enumerate_states(),
        x_star=x_star,
        y_star=y_star,
        radius=radius,
        samples=samples,
        rng=rng,
    )
    # F̄ is affine in x, so the smallest symmetric Jacobian eigenvalue bounds every quotient
    ys = y_star + uniform_ball(rng, samples, m, radius)
    xs = x_star + uniform_ball(rng, samples, m, radius)
    mu_F_jac = min(np.linalg.eigvalsh(0.5 * (J + J.T)).min() for J in _mean_F_jacobians(mean_F, xs, ys, m))
    est = est.model_copy(update={"mu_F": float(min(est.mu_F, mu_F_jac))})
    if est.mu_F <= 0.0:
        raise ProblemConfigError("features do not give a strongly monotone fast operator", field="features")
    if est.mu_G <= 0.0:
        raise ProblemConfigError(
            "slow operator is not one-point strongly monotone on the region", field="epsilon"
        )
    logger.info(
        f"GTD constants on radius {radius:g} (estimates): mu_F={est.mu_F:.4g} mu_G={est.mu_G:.4g} "
        f"L_F={est.L_F:.4g} L_G={est.L_G:.4g} L_H={est.L_H:.4g}"
    )

    return ProblemSpec(
        name=cfg.name or "gtd",
        d_x=m,
        d_y=m,
        F_fn=model.F,
        G_fn=model.G,
        noise=source,
        mu_F=est.mu_F,
        mu_G=est.mu_G,
        L_F=est.L_F,
        L_G=est.L_G,
        L_H=est.L_H,
        mean_F_fn=mean_F,
        mean_G_fn=mean_G,
        H_fn=H,
        fixed_point=(x_star, y_star),
        constants_estimated=True,
        config=cfg,
        notes={"pairs": pairs, "pair_weights": weights, "region_radius": radius, "empirical_constants": est},
    )


def _mean_F_jacobians(mean_F, xs: np.ndarray, ys: np.ndarray, m: int) -> list[np.ndarray]:
    """F̄ is affine in x for fixed y; recover Φ(y) column by column."""
    base = mean_F(np.zeros_like(xs), ys)
    cols = []
    for j in range(m):
        e = np.zeros_like(xs)
        e[:, j] = 1.0
        cols.append(mean_F(e, ys) - base)
    J = np.stack(cols, axis=2)
    return list(J)
