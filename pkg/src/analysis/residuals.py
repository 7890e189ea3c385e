"""
Residual variables x̂ = x − H(y), ŷ = y − y* and the noise residuals
ψ = F(x, y; ξ) − F̄(x, y), ζ = G(x, y; ξ) − Ḡ(x, y).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from src.core.kernels import sq_norm
from src.engine.iteration import Ensemble
from src.problems.spec import ProblemSpec


@dataclass(frozen=True)
class Residuals:
    x_hat: np.ndarray
    y_hat: np.ndarray
    z_hat_norm_sq: float | np.ndarray


def residuals(spec: ProblemSpec, x, y) -> Residuals:
    """Works on single vectors or on (n, d) batches."""
    spec.require("H")
    spec.require("fixed_point")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x_hat = x - spec.H(y)
    y_hat = y - spec.y_star
    if x.ndim == 1:
        z = float(np.dot(x_hat, x_hat) + np.dot(y_hat, y_hat))
    else:
        z = sq_norm(x_hat) + sq_norm(y_hat)
    return Residuals(x_hat=x_hat, y_hat=y_hat, z_hat_norm_sq=z)


def noise_residuals(spec: ProblemSpec, x, y, xi) -> tuple[np.ndarray, np.ndarray]:
    spec.require("mean_F")
    spec.require("mean_G")
    psi = spec.sample_F(x, y, xi) - spec.mean_F(x, y)
    zeta = spec.sample_G(x, y, xi) - spec.mean_G(x, y)
    return psi, zeta


def ensemble_residuals(spec: ProblemSpec, ens: Ensemble) -> tuple[np.ndarray, np.ndarray]:
    """x̂ and ŷ for every (trial, checkpoint), shaped like ens.x and ens.y."""
    n, m = ens.x.shape[:2]
    r = residuals(spec, ens.x.reshape(n * m, -1), ens.y.reshape(n * m, -1))
    return r.x_hat.reshape(n, m, -1), r.y_hat.reshape(n, m, -1)


def _se(a: np.ndarray) -> np.ndarray:
    n = a.shape[0]
    if n < 2:
        return np.zeros(a.shape[1])
    return a.std(axis=0, ddof=1) / np.sqrt(n)


def checkpoint_statistics(spec: ProblemSpec, ens: Ensemble, weights: np.ndarray) -> pd.DataFrame:
    """
    Per-checkpoint means and standard errors of ‖x̂‖², ‖ŷ‖² and the Lyapunov
    value V_k; *weights* is the x̂ weight of V at each checkpoint.
    """
    x_hat, y_hat = ensemble_residuals(spec, ens)
    xs = (x_hat**2).sum(axis=2)
    ys = (y_hat**2).sum(axis=2)
    v = ys + weights[None, :] * xs
    return pd.DataFrame(
        {
            "k": ens.ks,
            "mean_xhat_sq": xs.mean(axis=0),
            "se_xhat_sq": _se(xs),
            "mean_yhat_sq": ys.mean(axis=0),
            "se_yhat_sq": _se(ys),
            "V_k": v.mean(axis=0),
            "se_V_k": _se(v),
        }
    )


def trajectory_table(spec: ProblemSpec, ens: Ensemble) -> pd.DataFrame:
    """Per-trial checkpoint norms; residual and noise columns are empty when unavailable."""
    n, m = ens.x.shape[:2]
    trial = np.repeat(np.arange(n), m)
    ks = np.tile(ens.ks, n)
    cols: dict[str, np.ndarray] = {"trial": trial, "k": ks}
    nan = np.full(n * m, np.nan)
    if spec.fixed_point is not None:
        cols["norm_x_err"] = np.linalg.norm(ens.x - spec.x_star, axis=2).ravel()
        cols["norm_y_err"] = np.linalg.norm(ens.y - spec.y_star, axis=2).ravel()
    else:
        cols["norm_x_err"] = cols["norm_y_err"] = nan
    if spec.has_residuals:
        x_hat, y_hat = ensemble_residuals(spec, ens)
        cols["norm_xhat"] = np.linalg.norm(x_hat, axis=2).ravel()
        cols["norm_yhat"] = np.linalg.norm(y_hat, axis=2).ravel()
    else:
        cols["norm_xhat"] = cols["norm_yhat"] = nan
    cols["norm_psi"] = nan if ens.psi is None else np.linalg.norm(ens.psi, axis=2).ravel()
    cols["norm_zeta"] = nan if ens.zeta is None else np.linalg.norm(ens.zeta, axis=2).ravel()
    return pd.DataFrame(cols)
