"""
Markov noise sources.

A source describes one Markov chain of noise states. It offers two APIs:

* a single-owner stateful API (``reset`` / ``step``) for interactive use;
* a batched stateless API (``initial_states`` / ``advance``) used by the
  ensemble engine, where the per-trial states live in the iterate batch and
  the random draws come from per-trial generators through ``NoiseStream``.

Both paths share ``advance`` so they produce identical transitions.
"""
from __future__ import annotations

from abc import ABC, abstractmethod
from functools import cached_property

import numpy as np
from pydantic import BaseModel
from scipy.linalg import solve_discrete_lyapunov

from src.core.errors import (
    ChainValidationError,
    NoiseNotEnumerableError,
    UninitializedSourceError,
)
from src.core.kernels import rowdot
from src.noise.chain import FiniteChain, stationary_distribution


class MixingSurrogate(BaseModel):
    """Mixing summary for a continuous-state source, where exact τ is unavailable."""

    spectral_radius: float
    C: float
    memory_length: int | None
    caveat: str


class MarkovSource(ABC):
    """Common interface of the noise sources."""

    draw_kind: str = "uniform"
    draw_shape: tuple[int, ...] = ()
    enumerable: bool = False

    def __init__(self) -> None:
        self.state = None

    # ── Batched API ───────────────────────────────────────────────────────────

    @abstractmethod
    def advance(self, states: np.ndarray, draws: np.ndarray) -> np.ndarray:
        """One transition for every row of *states* given per-row draws."""

    @abstractmethod
    def initial_state(self, rng: np.random.Generator) -> np.ndarray:
        """Draw ξ from the stationary law using *rng*."""

    def initial_states(self, rngs: list[np.random.Generator]) -> np.ndarray:
        return np.stack([np.asarray(self.initial_state(g)) for g in rngs])

    def sample_draws(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.draw_kind == "uniform":
            return rng.random((size, *self.draw_shape))
        return rng.standard_normal((size, *self.draw_shape))

    # ── Stateful API ──────────────────────────────────────────────────────────

    def reset(self, state) -> None:
        self.state = np.asarray(state)

    def step(self, rng: np.random.Generator):
        """Advance the internal state by one transition and return it."""
        if self.state is None:
            raise UninitializedSourceError("noise source stepped before reset()")
        draws = self.sample_draws(rng, 1)
        self.state = self.advance(self.state[None, ...], draws)[0]
        return self.state

    # ── Enumeration ───────────────────────────────────────────────────────────

    def stationary_weights(self) -> np.ndarray:
        raise NoiseNotEnumerableError(
            f"{type(self).__name__} has a continuous state space; "
            "estimate expectations by Monte Carlo instead"
        )

    def enumerate_states(self) -> np.ndarray:
        raise NoiseNotEnumerableError(
            f"{type(self).__name__} has a continuous state space; "
            "estimate expectations by Monte Carlo instead"
        )


class FiniteChainSource(MarkovSource):
    """Noise states 0..n-1 driven by a finite ergodic chain."""

    draw_kind = "uniform"
    draw_shape = ()
    enumerable = True

    def __init__(self, chain: FiniteChain) -> None:
        super().__init__()
        self.chain = chain

    @cached_property
    def pi(self) -> np.ndarray:
        """Stationary law; requires an ergodic chain."""
        return stationary_distribution(self.chain)

    @cached_property
    def _pi_cum(self) -> np.ndarray:
        cum = np.cumsum(self.pi)
        cum[-1] = 1.0
        return cum

    @property
    def n_states(self) -> int:
        return self.chain.n

    def advance(self, states: np.ndarray, draws: np.ndarray) -> np.ndarray:
        # inverse CDF on row P[current]: count cumulative entries ≤ u
        return (self.chain.cumulative[states] <= draws[:, None]).sum(axis=1)

    def initial_state(self, rng: np.random.Generator) -> np.ndarray:
        u = rng.random()
        return np.asarray((self._pi_cum <= u).sum())

    def stationary_weights(self) -> np.ndarray:
        return self.pi

    def enumerate_states(self) -> np.ndarray:
        return np.arange(self.chain.n)


class ARSource(MarkovSource):
    """
    Autoregressive data source with state ξ = (ξ¹ ∈ R^d, ξ² ∈ R) packed as a
    (d+1)-vector:

        ξ¹_k = A ξ¹_{k−1} + e₁ W_k,    ξ²_k = ⟨x_true, ξ¹_k⟩ + V_k

    A is strictly subdiagonal with entries ``subdiagonal``; W_k has standard
    deviation ``innovation_std`` and V_k has ``noise_std``.
    """

    draw_kind = "normal"
    draw_shape = (2,)
    enumerable = False

    def __init__(
        self,
        subdiagonal,
        x_true,
        noise_std: float = 1.0,
        innovation_std: float = 1.0,
    ) -> None:
        super().__init__()
        self.x_true = np.asarray(x_true, dtype=float)
        self.d = self.x_true.shape[0]
        self.a = np.asarray(subdiagonal, dtype=float).reshape(-1)
        if self.a.shape[0] != self.d - 1:
            raise ChainValidationError(
                f"subdiagonal needs {self.d - 1} entries for d={self.d}, got {self.a.shape[0]}"
            )
        if not np.all(np.isfinite(self.a)):
            raise ChainValidationError("subdiagonal entries must be finite")
        if noise_std < 0 or innovation_std < 0:
            raise ChainValidationError("standard deviations must be nonnegative")
        self.noise_std = float(noise_std)
        self.innovation_std = float(innovation_std)
        if self.spectral_radius() >= 1.0:
            raise ChainValidationError("spectral radius of A must be < 1")

    @classmethod
    def random(
        cls,
        d: int,
        rng: np.random.Generator,
        x_true=None,
        low: float = 0.8,
        high: float = 0.99,
        noise_std: float = 1.0,
    ) -> ARSource:
        """Subdiagonal drawn uniformly in [low, high]; x_true standard normal if omitted."""
        a = rng.uniform(low, high, size=d - 1)
        if x_true is None:
            x_true = rng.standard_normal(d)
        return cls(a, x_true, noise_std=noise_std)

    @property
    def A(self) -> np.ndarray:
        return np.diag(self.a, k=-1) if self.d > 1 else np.zeros((1, 1))

    def spectral_radius(self) -> float:
        # A is lower triangular: its eigenvalues are the diagonal entries
        return float(np.max(np.abs(np.diag(self.A))))

    def stationary_covariance(self) -> np.ndarray:
        """Σ = E[ξ¹ξ¹ᵀ] under the stationary law, from Σ = AΣAᵀ + σ_W² e₁e₁ᵀ."""
        Q = np.zeros((self.d, self.d))
        Q[0, 0] = self.innovation_std**2
        return solve_discrete_lyapunov(self.A, Q)

    def advance(self, states: np.ndarray, draws: np.ndarray) -> np.ndarray:
        d = self.d
        new = np.empty_like(states, dtype=float)
        new[:, 0] = self.innovation_std * draws[:, 0]
        if d > 1:
            new[:, 1:d] = states[:, : d - 1] * self.a
        target = np.broadcast_to(self.x_true, (states.shape[0], d))
        new[:, d] = rowdot(new[:, :d], target) + self.noise_std * draws[:, 1]
        return new

    def initial_state(self, rng: np.random.Generator) -> np.ndarray:
        w, V = np.linalg.eigh(self.stationary_covariance())
        root = V * np.sqrt(np.clip(w, 0.0, None))
        xi1 = root @ rng.standard_normal(self.d)
        xi2 = float(xi1 @ self.x_true) + self.noise_std * rng.standard_normal()
        return np.concatenate([xi1, [xi2]])

    def mixing_surrogate(self) -> MixingSurrogate:
        rho = self.spectral_radius()
        if rho <= 1e-12:
            return MixingSurrogate(
                spectral_radius=rho,
                C=0.0,
                memory_length=self.d,
                caveat=(
                    "A is nilpotent: ξ_k is independent of ξ_{k-d}, so τ(α) ≤ d for every α; "
                    "no logarithmic constant is needed"
                ),
            )
        return MixingSurrogate(
            spectral_radius=rho,
            C=1.0 / np.log(1.0 / rho),
            memory_length=None,
            caveat="surrogate C = 1/log(1/ρ(A)); exact TV mixing is not computed for continuous states",
        )


class NoiseStream:
    """
    Per-trial random draws for the batched engine.

    Row i always consumes its own generator in fixed-size chunks, so a trial's
    stream does not depend on which other trials share the batch.
    """

    def __init__(
        self,
        source: MarkovSource,
        rngs: list[np.random.Generator],
        chunk: int = 4096,
    ) -> None:
        self.source = source
        self.rngs = rngs
        self.chunk = chunk
        self._buf = np.empty((len(rngs), chunk, *source.draw_shape))
        self._pos = chunk

    def _refill(self) -> None:
        for i, g in enumerate(self.rngs):
            self._buf[i] = self.source.sample_draws(g, self.chunk)
        self._pos = 0

    def next(self) -> np.ndarray:
        if self._pos == self.chunk:
            self._refill()
        draws = self._buf[:, self._pos]
        self._pos += 1
        return draws
