"""
Regression on autoregressive data with Polyak-Ruppert averaging, written as
a two-time-scale recursion:

    x_{k+1} = x_k − α_k (x_k − y_k)          (α_k = 1/(k+1): running average of y)
    y_{k+1} = y_k − β_k ∇ℓ(y_k; ξ_k)         (stochastic gradient step)

Shipped as a demonstration; its step sizes do not have the fast/slow ordering
the rate analysis needs.
"""
from __future__ import annotations

import numpy as np

from src.core.errors import ProblemConfigError
from src.core.kernels import matvec, rowdot
from src.noise.sources import ARSource
from src.problems.schemas import RobustPRConfig
from src.problems.spec import ProblemSpec

SUPPORTED_LOSSES = ("squared",)


def make_robust_pr(cfg: RobustPRConfig) -> ProblemSpec:
    if cfg.loss not in SUPPORTED_LOSSES:
        raise ProblemConfigError(
            f"unsupported loss {cfg.loss!r}; choose one of {SUPPORTED_LOSSES}", field="loss"
        )
    source = ARSource(
        cfg.subdiagonal,
        cfg.x_true,
        noise_std=cfg.noise_std,
        innovation_std=cfg.innovation_std,
    )
    d = source.d
    x_true = source.x_true
    Sigma = source.stationary_covariance()
    curvature = float(np.linalg.eigvalsh(Sigma).min())
    if curvature <= 0.0:
        raise ProblemConfigError(
            "stationary regressor covariance is singular; the target is not identifiable",
            field="subdiagonal",
        )

    def F_fn(x, y, xi):
        return x - y

    def G_fn(x, y, xi):
        # ∇_y (⟨y, ξ¹⟩ − ξ²)² = 2(⟨y, ξ¹⟩ − ξ²) ξ¹
        xi1 = xi[:, :d]
        residual = rowdot(y, xi1) - xi[:, d]
        return 2.0 * residual[:, None] * xi1

    def mean_F(x, y):
        return x - y

    def mean_G(x, y):
        return matvec(2.0 * Sigma, y - x_true)

    def H(y):
        return np.array(y, dtype=float, copy=True)

    # ∇ℓ is Lipschitz in y with modulus 2‖ξ¹‖², unbounded over Gaussian data:
    # report the sup over stationary draws.
    rng = np.random.default_rng(cfg.estimation_seed)
    states = source.initial_states([rng] * cfg.estimation_samples)
    L_G = float(2.0 * (states[:, :d] ** 2).sum(axis=1).max())

    return ProblemSpec(
        name=cfg.name or "robust_pr",
        d_x=d,
        d_y=d,
        F_fn=F_fn,
        G_fn=G_fn,
        noise=source,
        mu_F=1.0,
        mu_G=2.0 * curvature,
        L_F=float(np.sqrt(2.0)),
        L_G=L_G,
        L_H=1.0,
        mean_F_fn=mean_F,
        mean_G_fn=mean_G,
        H_fn=H,
        fixed_point=(x_true.copy(), x_true.copy()),
        constants_estimated=True,
        config=cfg,
        notes={"Sigma": Sigma},
    )
