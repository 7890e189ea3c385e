"""
ProblemSpec: a pair of sampled operators with optional exact structure.

Operator callables are batch-first: ``fn(x (n, d_x), y (n, d_y), xi (n, ...))``
returns an (n, d) array. The public methods also accept single vectors and
return single vectors.
"""
from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from src.core.errors import MissingCapabilityError
from src.noise.sources import MarkovSource

SampleFn = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
MeanFn = Callable[[np.ndarray, np.ndarray], np.ndarray]
MapFn = Callable[[np.ndarray], np.ndarray]


def _single(x) -> bool:
    return np.ndim(x) == 1


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    name: str
    d_x: int
    d_y: int
    F_fn: SampleFn
    G_fn: SampleFn
    noise: MarkovSource
    mu_F: float
    mu_G: float
    L_F: float
    L_G: float
    L_H: float
    mean_F_fn: MeanFn | None = None
    mean_G_fn: MeanFn | None = None
    H_fn: MapFn | None = None
    fixed_point: tuple[np.ndarray, np.ndarray] | None = None
    constants_estimated: bool = False
    config: Any = None
    notes: dict[str, Any] = field(default_factory=dict)

    # ── Capabilities ──────────────────────────────────────────────────────────

    @property
    def has_means(self) -> bool:
        return self.mean_F_fn is not None and self.mean_G_fn is not None

    @property
    def has_residuals(self) -> bool:
        return self.H_fn is not None and self.fixed_point is not None

    def require(self, capability: str) -> None:
        available = {
            "H": self.H_fn is not None,
            "fixed_point": self.fixed_point is not None,
            "mean_F": self.mean_F_fn is not None,
            "mean_G": self.mean_G_fn is not None,
        }
        if not available[capability]:
            raise MissingCapabilityError(capability)

    @property
    def x_star(self) -> np.ndarray:
        self.require("fixed_point")
        return self.fixed_point[0]

    @property
    def y_star(self) -> np.ndarray:
        self.require("fixed_point")
        return self.fixed_point[1]

    # ── Operators ─────────────────────────────────────────────────────────────

    def sample_F(self, x, y, xi) -> np.ndarray:
        return self._call3(self.F_fn, x, y, xi)

    def sample_G(self, x, y, xi) -> np.ndarray:
        return self._call3(self.G_fn, x, y, xi)

    def mean_F(self, x, y) -> np.ndarray:
        self.require("mean_F")
        return self._call2(self.mean_F_fn, x, y)

    def mean_G(self, x, y) -> np.ndarray:
        self.require("mean_G")
        return self._call2(self.mean_G_fn, x, y)

    def H(self, y) -> np.ndarray:
        self.require("H")
        y = np.asarray(y, dtype=float)
        if _single(y):
            return self.H_fn(y[None])[0]
        return self.H_fn(y)

    @staticmethod
    def _call3(fn: SampleFn, x, y, xi) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        xi = np.asarray(xi)
        if _single(x):
            return fn(x[None], y[None], xi[None])[0]
        return fn(x, y, xi)

    @staticmethod
    def _call2(fn: MeanFn, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if _single(x):
            return fn(x[None], y[None])[0]
        return fn(x, y)


def stationary_mean(fn: SampleFn, source: MarkovSource, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """
    Σ_ξ π(ξ)·fn(x, y, ξ) for an enumerable source, batched over rows of x, y.

    States are accumulated in index order so the result is reproducible.
    """
    weights = source.stationary_weights()
    states = source.enumerate_states()
    n = x.shape[0]
    total = None
    for w, s in zip(weights, states, strict=True):
        term = w * fn(x, y, np.full(n, s))
        total = term if total is None else total + term
    return total
