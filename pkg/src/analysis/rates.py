"""Log-log rate fits of checkpoint series."""
from __future__ import annotations

import numpy as np
from pydantic import BaseModel, Field
from scipy.stats import linregress

from src.core.errors import InsufficientCheckpointsError

MIN_POINTS = 8


class RateFit(BaseModel):
    """OLS of log(value) on log(k+1) over k in [k_lo, k_hi]."""

    slope: float
    intercept: float
    r2: float = Field(ge=0.0, le=1.0)
    k_window: tuple[int, int]
    points: int
    stderr: float = 0.0

    def in_band(self, slope_min: float, slope_max: float, min_r2: float) -> bool:
        return slope_min <= self.slope <= slope_max and self.r2 >= min_r2


def default_window(Kstar: int, k_max: int) -> tuple[int, int]:
    return max(Kstar, k_max // 100), k_max


def fit_rate(series, k_lo: int, k_hi: int | None = None, min_points: int = MIN_POINTS) -> RateFit:
    """*series* is an iterable of (k, value) pairs."""
    data = np.asarray(list(series), dtype=float).reshape(-1, 2)
    ks, values = data[:, 0], data[:, 1]
    k_hi = int(ks.max()) if k_hi is None else k_hi
    mask = (ks >= k_lo) & (ks <= k_hi)
    ks, values = ks[mask], values[mask]
    if ks.size < min_points:
        raise InsufficientCheckpointsError(int(ks.size), min_points)
    if np.any(values <= 0.0) or not np.all(np.isfinite(values)):
        raise ValueError("rate fit needs finite positive values")
    lx = np.log(ks + 1.0)
    ly = np.log(values)
    fit = linregress(lx, ly)
    if np.ptp(ly) == 0.0:
        r2 = 1.0
    else:
        r2 = float(min(1.0, fit.rvalue**2))
    return RateFit(
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        r2=r2,
        k_window=(int(k_lo), int(k_hi)),
        points=int(ks.size),
        stderr=float(fit.stderr),
    )
