"""
Linear two-time-scale problem with additive Markovian bias tables.

The fast operator's linear part must have a positive-definite symmetric part
(descent form of the update); so must the Schur complement
Δ = A22 − A21·A11⁻¹·A12 of the slow operator.
"""
from __future__ import annotations

import numpy as np

from src.core.errors import ProblemConfigError
from src.core.kernels import matvec
from src.core.logger import setup_logger
from src.noise.chain import FiniteChain
from src.noise.sources import FiniteChainSource
from src.problems.schemas import LinearTTSAConfig
from src.problems.spec import ProblemSpec

logger = setup_logger("problems")

ZERO_MEAN_TOL = 1e-12


def _matrix(cfg: LinearTTSAConfig, name: str, shape: tuple[int, int]) -> np.ndarray:
    M = np.asarray(getattr(cfg, name), dtype=float)
    if M.shape != shape:
        raise ProblemConfigError(f"{name} has shape {M.shape}, expected {shape}", field=name)
    return M


def _table(cfg: LinearTTSAConfig, name: str, n: int, d: int) -> np.ndarray:
    raw = getattr(cfg, name)
    if raw is None:
        return np.zeros((n, d))
    T = np.asarray(raw, dtype=float)
    if T.shape != (n, d):
        raise ProblemConfigError(f"{name} has shape {T.shape}, expected {(n, d)}", field=name)
    return T


def _offset(cfg: LinearTTSAConfig, name: str, d: int) -> np.ndarray:
    raw = getattr(cfg, name)
    if raw is None:
        return np.zeros(d)
    v = np.asarray(raw, dtype=float)
    if v.shape != (d,):
        raise ProblemConfigError(f"{name} has length {v.shape[0]}, expected {d}", field=name)
    return v


def _min_sym_eig(M: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(0.5 * (M + M.T)).min())


def make_linear(cfg: LinearTTSAConfig, chain: FiniteChain) -> ProblemSpec:
    A11 = np.asarray(cfg.A11, dtype=float)
    if A11.ndim != 2 or A11.shape[0] != A11.shape[1]:
        raise ProblemConfigError("A11 must be square", field="A11")
    d_x = A11.shape[0]
    A22 = np.asarray(cfg.A22, dtype=float)
    if A22.ndim != 2 or A22.shape[0] != A22.shape[1]:
        raise ProblemConfigError("A22 must be square", field="A22")
    d_y = A22.shape[0]
    A12 = _matrix(cfg, "A12", (d_x, d_y))
    A21 = _matrix(cfg, "A21", (d_y, d_x))

    n = chain.n
    b_F = _table(cfg, "b_F", n, d_x)
    b_G = _table(cfg, "b_G", n, d_y)
    c_F = _offset(cfg, "c_F", d_x)
    c_G = _offset(cfg, "c_G", d_y)

    if np.linalg.matrix_rank(A11) < d_x:
        raise ProblemConfigError("A11 is singular", field="A11")
    mu_F = _min_sym_eig(A11)
    if mu_F <= 0.0:
        raise ProblemConfigError(
            f"symmetric part of A11 must be positive definite (min eigenvalue {mu_F:.3e})",
            field="A11",
        )
    K = -np.linalg.solve(A11, A12)  # H(y) = K y + h0
    h0 = -np.linalg.solve(A11, c_F)
    Delta = A22 + A21 @ K
    mu_G = _min_sym_eig(Delta)
    if mu_G <= 0.0:
        raise ProblemConfigError(
            f"symmetric part of A22 - A21 A11^-1 A12 must be positive definite "
            f"(min eigenvalue {mu_G:.3e})",
            field="A22",
        )

    source = FiniteChainSource(chain)
    pi = source.pi
    for name, table in (("b_F", b_F), ("b_G", b_G)):
        drift = np.abs(pi @ table).max()
        if drift > ZERO_MEAN_TOL * max(1.0, float(np.abs(table).max())):
            raise ProblemConfigError(
                f"{name} has stationary mean {drift:.3e}; it must average to zero", field=name
            )

    block = np.block([[A11, A12], [A21, A22]])
    z_star = np.linalg.solve(block, -np.concatenate([c_F, c_G]))
    x_star, y_star = z_star[:d_x], z_star[d_x:]

    L_F = float(np.linalg.norm(np.hstack([A11, A12]), 2))
    L_G = float(np.linalg.norm(np.hstack([A21, A22]), 2))
    L_H = float(np.linalg.norm(K, 2))
    if mu_G > L_G:
        logger.warning(f"mu_G = {mu_G:.4g} exceeds L_G = {L_G:.4g}")

    def F_fn(x, y, xi):
        return matvec(A11, x) + matvec(A12, y) + c_F + b_F[xi]

    def G_fn(x, y, xi):
        return matvec(A21, x) + matvec(A22, y) + c_G + b_G[xi]

    def mean_F(x, y):
        return matvec(A11, x) + matvec(A12, y) + c_F

    def mean_G(x, y):
        return matvec(A21, x) + matvec(A22, y) + c_G

    def H(y):
        return matvec(K, y) + h0

    return ProblemSpec(
        name=cfg.name or "linear",
        d_x=d_x,
        d_y=d_y,
        F_fn=F_fn,
        G_fn=G_fn,
        noise=source,
        mu_F=mu_F,
        mu_G=mu_G,
        L_F=L_F,
        L_G=L_G,
        L_H=L_H,
        mean_F_fn=mean_F,
        mean_G_fn=mean_G,
        H_fn=H,
        fixed_point=(x_star, y_star),
        config=cfg,
        notes={"Delta": Delta, "b_F": b_F, "b_G": b_G},
    )
