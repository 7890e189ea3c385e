"""
Step-size schedules α_k = α₀/(k+1)^a, β_k = β₀/(k+1)^b and their checks.
"""
from __future__ import annotations

import math

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.core.errors import KstarNotFoundError, ScheduleError

TWO_THIRDS = 2.0 / 3.0


def _power(base, exponent: float):
    # cube roots keep (k+1)^{2/3} exact on perfect cubes
    if exponent == TWO_THIRDS:
        return np.cbrt(base) ** 2
    return np.power(base, exponent)


class StepSchedule(BaseModel):
    """The (α_k, β_k) family; defaults are the fast/slow exponents 2/3 and 1."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    alpha0: float = Field(gt=0.0)
    beta0: float = Field(gt=0.0)
    alpha_exponent: float = TWO_THIRDS
    beta_exponent: float = 1.0

    def alpha(self, k: int) -> float:
        return float(self.alpha0 / _power(float(k + 1), self.alpha_exponent))

    def beta(self, k: int) -> float:
        return float(self.beta0 / _power(float(k + 1), self.beta_exponent))

    def alphas(self, ks) -> np.ndarray:
        return self.alpha0 / _power(np.asarray(ks, dtype=float) + 1.0, self.alpha_exponent)

    def betas(self, ks) -> np.ndarray:
        return self.beta0 / _power(np.asarray(ks, dtype=float) + 1.0, self.beta_exponent)

    @property
    def is_default_family(self) -> bool:
        return self.alpha_exponent == TWO_THIRDS and self.beta_exponent == 1.0


def alpha(schedule: StepSchedule, k: int) -> float:
    return schedule.alpha(k)


def beta(schedule: StepSchedule, k: int) -> float:
    return schedule.beta(k)


# ── Validation ────────────────────────────────────────────────────────────────


class ScheduleCheck(BaseModel):
    name: str
    passed: bool
    required: bool = True
    detail: str = ""


class ScheduleReport(BaseModel):
    checks: list[ScheduleCheck]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if c.required)

    def failures(self) -> list[str]:
        return [c.name for c in self.checks if c.required and not c.passed]


def validate_schedule(schedule: StepSchedule, mu_F: float, mu_G: float, B: float) -> ScheduleReport:
    """Report-style validation of the rate conditions; never raises."""
    a, b = schedule.alpha_exponent, schedule.beta_exponent
    ratio = schedule.beta0 / schedule.alpha0
    ratio_cap = max(mu_F / (2.0 * mu_G), mu_F * mu_G / B**2)
    checks = [
        ScheduleCheck(
            name="ratio",
            passed=ratio <= ratio_cap,
            detail=f"beta0/alpha0 = {ratio:.6g} <= max(mu_F/(2 mu_G), mu_F mu_G/B^2) = {ratio_cap:.6g}",
        ),
        ScheduleCheck(
            name="beta0_lower",
            passed=schedule.beta0 >= 2.0 / mu_G,
            detail=f"beta0 = {schedule.beta0:.6g} >= 2/mu_G = {2.0 / mu_G:.6g} (used by the rate proof)",
        ),
        ScheduleCheck(
            name="beta0_lower_stated",
            passed=schedule.beta0 >= 1.0 / mu_G,
            required=False,
            detail=(
                f"beta0 >= 1/mu_G = {1.0 / mu_G:.6g} as stated with the rate; "
                "the proof needs 2/mu_G, which is what is enforced"
            ),
        ),
        ScheduleCheck(
            name="alpha_divergent",
            passed=a <= 1.0,
            detail=f"sum alpha_k diverges iff alpha_exponent = {a:.6g} <= 1",
        ),
        ScheduleCheck(
            name="beta_divergent",
            passed=b <= 1.0,
            detail=f"sum beta_k diverges iff beta_exponent = {b:.6g} <= 1",
        ),
        ScheduleCheck(
            name="square_summable",
            passed=(2 * a > 1.0) and (2 * b > 1.0) and (2 * b - a > 1.0),
            detail=f"exponents 2a = {2 * a:.6g}, 2b = {2 * b:.6g}, 2b - a = {2 * b - a:.6g} all > 1",
        ),
        ScheduleCheck(
            name="ordering",
            passed=schedule.beta0 <= schedule.alpha0 and b >= a,
            required=False,
            detail="beta_k <= alpha_k for all k",
        ),
    ]
    return ScheduleReport(checks=checks)


# ── Mixing windows and K* ─────────────────────────────────────────────────────


def tau_of(alpha_k, C: float, k=None):
    """τ(α_k) = ceil(C·log(1/α_k)), clipped to [0, k]."""
    alpha_k = np.asarray(alpha_k, dtype=float)
    tau = np.ceil(C * np.log(1.0 / alpha_k))
    tau = np.clip(tau, 0, None) if k is None else np.clip(tau, 0, k)
    return tau.astype(np.int64)


def tail_step_sum(schedule: StepSchedule, k: int, tau: int) -> float:
    """α_{k;τ} = Σ_{t=k−τ}^{k} α_t."""
    if tau < 0 or tau > k:
        raise ScheduleError(f"window tau={tau} must satisfy 0 <= tau <= k={k}")
    return math.fsum(schedule.alphas(np.arange(k - tau, k + 1)))


def tail_step_sums(schedule: StepSchedule, ks, taus) -> np.ndarray:
    """Vectorised α_{k;τ} for arrays of k and τ (via prefix sums)."""
    ks = np.asarray(ks, dtype=np.int64)
    taus = np.asarray(taus, dtype=np.int64)
    if ks.size == 0:
        return np.zeros(0)
    lo = int((ks - taus).min())
    hi = int(ks.max())
    prefix = np.concatenate([[0.0], np.cumsum(schedule.alphas(np.arange(lo, hi + 1)))])
    return prefix[ks - lo + 1] - prefix[ks - taus - lo]


def kstar_threshold(schedule: StepSchedule, B: float) -> float:
    return min(math.log(2.0) / (2.0 * B), schedule.alpha0)


def window_products(schedule: StepSchedule, C: float, ks) -> np.ndarray:
    """τ(α_k)·α_{k−τ(α_k)} for each k."""
    ks = np.asarray(ks, dtype=np.int64)
    a = schedule.alphas(ks)
    tau = tau_of(a, C, ks)
    return tau * schedule.alphas(ks - tau)


def compute_Kstar(schedule: StepSchedule, B: float, C: float, cap: int) -> int:
    """
    Smallest k ≤ cap with τ(α_k)·α_{k−τ(α_k)} ≤ min{log 2/(2B), α₀}, such that
    the condition also holds at every k′ in [k, min(10(k+1), cap)].
    """
    if B <= 0:
        raise ScheduleError("B must be positive")
    if C < 0:
        raise ScheduleError("C must be nonnegative")
    threshold = kstar_threshold(schedule, B)
    ks = np.arange(cap + 1, dtype=np.int64)
    lhs = window_products(schedule, C, ks)
    ok = lhs <= threshold
    # sentinel past the cap so every k has a next failure
    fails = np.append(np.flatnonzero(~ok), cap + 1)
    next_fail = fails[np.searchsorted(fails, ks)]
    horizon = np.minimum(10 * (ks + 1), cap)
    good = np.flatnonzero(ok & (next_fail > horizon))
    if good.size == 0:
        raise KstarNotFoundError(cap, float(lhs[1:].min() if cap > 0 else lhs[0]), threshold)
    return int(good[0])
