"""
Finite Markov chains: validation, ergodicity, stationary law, mixing.

All mixing quantities are computed from exact matrix powers (repeated
multiplication in double precision); chains are small (n ≤ 64).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import sparse
from scipy.sparse.csgraph import connected_components, shortest_path
from scipy.stats import linregress

from src.core.config import Config
from src.core.errors import (
    ChainValidationError,
    MixingCapExceededError,
    NonErgodicChainError,
)

ROW_TOL = 1e-12
PROB_TOL = 1e-9
STATIONARY_TOL = 1e-10


class ChainConfig(BaseModel):
    """Row-major transition matrix as read from a config file."""

    model_config = ConfigDict(extra="forbid")

    P: list[list[float]] = Field(min_length=2)


class MixingProfile(BaseModel):
    """τ(α) table with its through-origin fit τ(α) ≈ C·log(1/α)."""

    C: float = Field(ge=0.0)
    tau_table: dict[float, int]
    fit_r2: float = Field(ge=0.0, le=1.0)
    intercept: float = 0.0


@dataclass(frozen=True, eq=False)
class FiniteChain:
    """Row-stochastic chain on states 0..n-1."""

    P: np.ndarray

    def __post_init__(self) -> None:
        P = np.array(self.P, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] < 2:
            raise ChainValidationError(f"P must be square with n >= 2, got shape {P.shape}")
        if np.any(P < 0.0) or np.any(P > 1.0):
            raise ChainValidationError("P entries must lie in [0, 1]")
        row_err = np.abs(P.sum(axis=1) - 1.0)
        if np.any(row_err > ROW_TOL):
            bad = int(np.argmax(row_err))
            raise ChainValidationError(f"row {bad} of P sums to {P[bad].sum()!r}")
        P.setflags(write=False)
        object.__setattr__(self, "P", P)

    @classmethod
    def from_config(cls, cfg: ChainConfig) -> FiniteChain:
        return cls(np.asarray(cfg.P, dtype=float))

    @property
    def n(self) -> int:
        return self.P.shape[0]

    @cached_property
    def cumulative(self) -> np.ndarray:
        """Row-wise cumulative sums used for inverse-CDF sampling."""
        cum = np.cumsum(self.P, axis=1)
        cum[:, -1] = 1.0
        return cum

    @cached_property
    def ergodicity_failure(self) -> str | None:
        """``None`` when ergodic, else ``"reducible"`` or ``"periodic"``."""
        support = sparse.csr_matrix((self.P > 0.0).astype(float))
        n_comp, _ = connected_components(support, directed=True, connection="strong")
        if n_comp != 1:
            return "reducible"
        # period = gcd over edges (u, v) of level(u) + 1 - level(v), levels from state 0
        level = shortest_path(support, method="D", unweighted=True, indices=0)
        period = 0
        for u, v in zip(*np.nonzero(self.P > 0.0), strict=True):
            period = math.gcd(period, int(abs(level[u] + 1 - level[v])))
        return None if period == 1 else "periodic"

    @property
    def is_ergodic(self) -> bool:
        return self.ergodicity_failure is None

    def require_ergodic(self) -> None:
        if self.ergodicity_failure is not None:
            raise NonErgodicChainError(self.ergodicity_failure)


def stationary_distribution(chain: FiniteChain) -> np.ndarray:
    """Solve πP = π, Σπ = 1 by least squares on the stacked system."""
    chain.require_ergodic()
    n = chain.n
    A = np.vstack((chain.P.T - np.eye(n), np.ones((1, n))))
    b = np.zeros(n + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    pi = np.clip(pi, 0.0, None)
    pi = pi / pi.sum()
    residual = float(np.max(np.abs(pi @ chain.P - pi)))
    if residual > STATIONARY_TOL:
        raise ChainValidationError(f"stationary solve residual {residual:.2e} exceeds tolerance")
    return pi


def _check_probability(p: np.ndarray, name: str) -> None:
    if abs(float(p.sum()) - 1.0) > PROB_TOL or np.any(p < -PROB_TOL):
        raise ChainValidationError(f"{name} is not a probability vector (sum {p.sum()!r})")


def tv_distance(p, q) -> float:
    """Total-variation distance (1/2)·Σ|p_i − q_i|."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ChainValidationError(f"length mismatch: {p.shape} vs {q.shape}")
    _check_probability(p, "p")
    _check_probability(q, "q")
    return 0.5 * float(np.abs(p - q).sum())


def _max_tv(Pk: np.ndarray, pi: np.ndarray) -> float:
    return 0.5 * float(np.abs(Pk - pi).sum(axis=1).max())


def mixing_time(chain: FiniteChain, alpha: float, cap: int | None = None) -> int:
    """Smallest k ≥ 0 with max over start states of TV(P^k(ξ₀,·), π) ≤ alpha."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    cap = Config.MIXING_CAP if cap is None else cap
    pi = stationary_distribution(chain)
    Pk = np.eye(chain.n)
    for k in range(cap + 1):
        if _max_tv(Pk, pi) <= alpha:
            return k
        Pk = Pk @ chain.P
    raise MixingCapExceededError(cap, _max_tv(Pk, pi))


def tv_profile(chain: FiniteChain, K: int) -> np.ndarray:
    """Max-over-starts TV distance to π for k = 0..K."""
    pi = stationary_distribution(chain)
    out = np.empty(K + 1)
    Pk = np.eye(chain.n)
    for k in range(K + 1):
        out[k] = _max_tv(Pk, pi)
        Pk = Pk @ chain.P
    return out


def fit_through_origin(alphas, taus) -> MixingProfile:
    """Least-squares fit τ = C·log(1/α) without intercept (uncentered R²)."""
    alphas = np.asarray(alphas, dtype=float)
    taus = np.asarray(taus, dtype=float)
    if len(np.unique(alphas)) < 4:
        raise ValueError("need at least 4 distinct alphas for the mixing fit")
    if np.any(alphas <= 0.0) or np.any(alphas >= 1.0):
        raise ValueError("alphas must lie in (0, 1)")
    L = np.log(1.0 / alphas)
    C = float(L @ taus / (L @ L))
    ss_res = float(np.sum((taus - C * L) ** 2))
    ss_tot = float(taus @ taus)
    r2 = 1.0 if ss_tot == 0.0 else min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    intercept = float(linregress(L, taus).intercept) if np.ptp(taus) > 0 else float(taus[0])
    return MixingProfile(
        C=max(C, 0.0),
        tau_table={float(a): int(t) for a, t in zip(alphas, taus, strict=True)},
        fit_r2=r2,
        intercept=intercept,
    )


def fit_mixing_constant(chain: FiniteChain, alphas, cap: int | None = None) -> MixingProfile:
    """Exact τ(α) on the grid, then the through-origin fit."""
    alphas = [float(a) for a in alphas]
    taus = [mixing_time(chain, a, cap=cap) for a in alphas]
    return fit_through_origin(alphas, taus)


def bias_profile(chain: FiniteChain, f, K: int) -> np.ndarray:
    """For k = 0..K: max over ξ₀ of ‖(P^k f)(ξ₀) − Σ π_i f_i‖."""
    pi = stationary_distribution(chain)
    f = np.asarray(f, dtype=float)
    if f.ndim == 1:
        f = f[:, None]
    if f.shape[0] != chain.n:
        raise ValueError(f"f has {f.shape[0]} rows, chain has {chain.n} states")
    mean = pi @ f
    out = np.empty(K + 1)
    Pk_f = f.copy()
    for k in range(K + 1):
        out[k] = float(np.sqrt(((Pk_f - mean) ** 2).sum(axis=1)).max())
        Pk_f = chain.P @ Pk_f
    return out


def pair_chain(chain: FiniteChain) -> tuple[FiniteChain, np.ndarray]:
    """
    Chain on transition pairs (ζ, ζ′) with P(ζ, ζ′) > 0.

    Returns the pair chain and an (N, 2) array mapping pair index to (ζ, ζ′).
    Its stationary law is π(ζ)·P(ζ, ζ′).
    """
    pairs = np.argwhere(chain.P > 0.0)
    index = {(int(a), int(b)): i for i, (a, b) in enumerate(pairs)}
    Q = np.zeros((len(pairs), len(pairs)))
    for i, (_, nxt) in enumerate(pairs):
        for k in np.nonzero(chain.P[nxt] > 0.0)[0]:
            Q[i, index[(int(nxt), int(k))]] = chain.P[nxt, k]
    return FiniteChain(Q), pairs
