"""
Lyapunov function, theorem constants and the finite-time bound.

D₂, D and the bound itself overflow double precision for any realistic B,
so they are carried as natural logarithms throughout. An independent
extended-precision path (``theorem_bound_decimal``) evaluates the same
bound with ``decimal`` for cross-checking.
"""
from __future__ import annotations

import math
from decimal import MAX_EMAX, MIN_EMIN, Context, Decimal, localcontext

import numpy as np
from pydantic import BaseModel, Field
from scipy.special import logsumexp

from src.core.config import Config
from src.core.errors import ScheduleError
from src.core.logger import setup_logger
from src.engine.schedule import (
    StepSchedule,
    compute_Kstar,
    tail_step_sums,
    tau_of,
)
from src.noise.chain import FiniteChain, fit_mixing_constant
from src.noise.sources import ARSource, FiniteChainSource
from src.problems.constants import estimate_B
from src.problems.spec import ProblemSpec

logger = setup_logger("analysis")

MIXING_ALPHAS = tuple(np.logspace(-1, -4, 7))
D1_CHUNK = 1_000_000


class BoundConstants(BaseModel):
    """Theorem constants; D₂ and D are stored as natural logs."""

    B: float = Field(gt=0.0)
    C: float = Field(ge=0.0)
    Kstar: int = Field(ge=0)
    D1: float
    D1_tail: float = 0.0
    log_D2: float
    log_D: float
    mu_F: float = Field(gt=0.0)
    mu_G: float = Field(gt=0.0)
    R: float = 1.0
    zhat0_sq_mean: float = 0.0
    B_terms: dict[str, float] = Field(default_factory=dict)

    @property
    def log10_D2(self) -> float:
        return self.log_D2 / math.log(10.0)

    @property
    def log10_D(self) -> float:
        return self.log_D / math.log(10.0)

    def report(self) -> dict:
        return {
            "B": self.B,
            "C": self.C,
            "Kstar": self.Kstar,
            "D1": self.D1,
            "D1_tail": self.D1_tail,
            "log10_D2": self.log10_D2,
            "log10_D": self.log10_D,
            "mu_F": self.mu_F,
            "mu_G": self.mu_G,
            "R": self.R,
        }


# ── Lyapunov function ─────────────────────────────────────────────────────────


def lyapunov_weight(k, schedule: StepSchedule, B: float, mu_F: float, mu_G: float):
    """(2B²/(μ_F μ_G))·(β_k/α_k)."""
    ks = np.asarray(k)
    w = 2.0 * B**2 / (mu_F * mu_G) * schedule.betas(ks) / schedule.alphas(ks)
    return float(w) if np.ndim(k) == 0 else w


def lyapunov(norm_yhat_sq_mean, norm_xhat_sq_mean, k, schedule: StepSchedule, constants) -> float:
    """V_k = E‖ŷ_k‖² + (2B²/(μ_F μ_G))(β_k/α_k) E‖x̂_k‖²."""
    w = lyapunov_weight(k, schedule, constants.B, constants.mu_F, constants.mu_G)
    return norm_yhat_sq_mean + w * norm_xhat_sq_mean


# ── D₁ ────────────────────────────────────────────────────────────────────────


def d1_summands(schedule: StepSchedule, ks, C: float, mu: float) -> np.ndarray:
    """β_k²/(μ α_k) + β_k² + α_k α_{k;τ(α_k)}."""
    ks = np.asarray(ks, dtype=np.int64)
    a = schedule.alphas(ks)
    b = schedule.betas(ks)
    taus = tau_of(a, C, ks)
    return b**2 / (mu * a) + b**2 + a * tail_step_sums(schedule, ks, taus)


def _power_tail(N: float, p: float) -> float:
    """∫_N^∞ u^{−p} du."""
    return N ** (1.0 - p) / (p - 1.0)


def _power_log_tail(N: float, p: float) -> float:
    """∫_N^∞ u^{−p} log u du."""
    q = p - 1.0
    return N ** (1.0 - p) * (math.log(N) / q + 1.0 / q**2)


def d1_tail_bound(schedule: StepSchedule, N: int, C: float, mu: float) -> float:
    """
    Integral-test bound on Σ_{k ≥ N} of the D₁ summands. Uses
    α_{k;τ} ≤ (τ + 1)·α_{k−τ} ≤ (τ + 1)·2^a·α_k once τ ≤ (k + 1)/2, and
    τ + 1 ≤ C·log(1/α₀) + 2 + C·a·log(k + 1).
    """
    a, b = schedule.alpha_exponent, schedule.beta_exponent
    a0, b0 = schedule.alpha0, schedule.beta0
    tau_N = int(tau_of(schedule.alpha(N), C, N))
    if 2 * tau_N + 2 > N:
        raise ScheduleError(f"D1 truncation at {N} terms is too short for mixing window {tau_N}")
    lead = C * max(math.log(1.0 / a0), 0.0) + 2.0
    tail = b0**2 / (mu * a0) * _power_tail(N, 2 * b - a)
    tail += b0**2 * _power_tail(N, 2 * b)
    scale = a0**2 * 2.0**a
    tail += scale * (lead * _power_tail(N, 2 * a) + C * a * _power_log_tail(N, 2 * a))
    return tail


def compute_D1(schedule: StepSchedule, C: float, mu: float, terms: int | None = None) -> tuple[float, float]:
    """Partial sum over k < terms, and the tail bound; D₁ is their sum."""
    a, b = schedule.alpha_exponent, schedule.beta_exponent
    if not (2 * a > 1.0 and 2 * b > 1.0 and 2 * b - a > 1.0):
        raise ScheduleError(f"D1 diverges for exponents alpha={a:.6g}, beta={b:.6g}")
    terms = int(Config.D1_TERMS if terms is None else terms)
    partial = []
    for lo in range(0, terms, D1_CHUNK):
        ks = np.arange(lo, min(lo + D1_CHUNK, terms))
        partial.append(math.fsum(d1_summands(schedule, ks, C, mu)))
    return math.fsum(partial), d1_tail_bound(schedule, terms, C, mu)


# ── Constants ─────────────────────────────────────────────────────────────────


def mixing_constant(spec: ProblemSpec, chain: FiniteChain | None = None) -> float:
    """C for the problem's noise: exact τ fit on a finite chain, surrogate for AR data."""
    if chain is None and isinstance(spec.noise, FiniteChainSource):
        chain = spec.noise.chain
    if chain is not None:
        profile = fit_mixing_constant(chain, MIXING_ALPHAS)
        logger.info(f"mixing fit C={profile.C:.4g} (r2={profile.fit_r2:.3f})")
        return profile.C
    if isinstance(spec.noise, ARSource):
        surrogate = spec.noise.mixing_surrogate()
        logger.warning(f"{spec.name}: {surrogate.caveat}")
        return surrogate.C
    raise ScheduleError(f"no mixing constant available for noise {type(spec.noise).__name__}")


def log_D2_value(B: float, R: float) -> float:
    """log D₂ = log(160 (1+B)⁶ R²)."""
    return math.log(160.0) + 6.0 * math.log1p(B) + 2.0 * math.log(R)


def log_D_value(zhat0_sq_mean: float, D1: float, log_D2: float, B: float) -> float:
    """log(E‖ẑ₀‖² e^{160 D₁(B+1)⁶} + D₁ D₂ e^{320 D₁(B+1)⁶})."""
    growth = D1 * (B + 1.0) ** 6
    terms = [math.log(D1) + log_D2 + 320.0 * growth]
    if zhat0_sq_mean > 0.0:
        terms.append(math.log(zhat0_sq_mean) + 160.0 * growth)
    return float(logsumexp(terms))


def compute_constants(
    spec: ProblemSpec,
    schedule: StepSchedule,
    chain: FiniteChain | None = None,
    *,
    B: float | None = None,
    C: float | None = None,
    zhat0_sq_mean: float = 0.0,
    d1_terms: int | None = None,
    kstar_cap: int | None = None,
) -> BoundConstants:
    spec.require("H")
    spec.require("fixed_point")
    B_terms: dict[str, float] = {}
    if B is None:
        estimate = estimate_B(spec)
        B, B_terms = estimate.value, estimate.terms
    C = mixing_constant(spec, chain) if C is None else C
    cap = int(Config.KSTAR_CAP if kstar_cap is None else kstar_cap)
    Kstar = compute_Kstar(schedule, B, C, cap)
    D1_sum, D1_tail = compute_D1(schedule, C, spec.mu_F, d1_terms)
    D1 = D1_sum + D1_tail
    R = float(np.linalg.norm(spec.y_star) + np.linalg.norm(spec.H(np.zeros(spec.d_y))) + 1.0)
    log_D2 = log_D2_value(B, R)
    log_D = log_D_value(zhat0_sq_mean, D1, log_D2, B)
    constants = BoundConstants(
        B=B,
        C=C,
        Kstar=Kstar,
        D1=D1,
        D1_tail=D1_tail,
        log_D2=log_D2,
        log_D=log_D,
        mu_F=spec.mu_F,
        mu_G=spec.mu_G,
        R=R,
        zhat0_sq_mean=zhat0_sq_mean,
        B_terms=B_terms,
    )
    logger.info(
        f"constants: B={B:.4g} C={C:.4g} K*={Kstar} D1={D1:.4g} "
        f"log10 D2={constants.log10_D2:.4g} log10 D={constants.log10_D:.4g}"
    )
    return constants


# ── Theorem bound ─────────────────────────────────────────────────────────────


def _rate_terms(k: int, constants: BoundConstants, schedule: StepSchedule) -> float:
    a0, b0, mu_F = schedule.alpha0, schedule.beta0, constants.mu_F
    scale = float(np.cbrt(k + 1.0) ** 2)
    t1 = (5.0 * b0**3 + 2.0 * mu_F * b0 * a0**3) / (mu_F * a0**2) / scale
    t2 = 4.0 * constants.C * b0 * a0 * math.log((k + 1.0) / a0) / scale
    return t1 + t2


def theorem_bound(k: int, constants: BoundConstants, V_at_Kstar: float, schedule: StepSchedule) -> float:
    """
    Natural log of the right side bounding V_{k+1}:

        (K*)² V_{K*}/(k+1)² + (5D₂ + 64D(1+B)⁸)/(2μ_F μ_G) · (T₁ + T₂)

    with T₁ = (5β₀³ + 2μ_Fβ₀α₀³)/(μ_Fα₀²)·(k+1)^{−2/3} and
    T₂ = 4Cβ₀α₀ log((k+1)/α₀)/(k+1)^{2/3}.
    """
    if k < constants.Kstar:
        raise ScheduleError(f"bound holds for k >= K* = {constants.Kstar}, got k = {k}")
    return _log_bound(k, constants, V_at_Kstar, schedule)


def _log_bound(k: int, constants: BoundConstants, V_at_Kstar: float, schedule: StepSchedule) -> float:
    B = constants.B
    terms = []
    if constants.Kstar > 0 and V_at_Kstar > 0.0:
        terms.append(2.0 * math.log(constants.Kstar) + math.log(V_at_Kstar) - 2.0 * math.log(k + 1.0))
    rate = _rate_terms(k, constants, schedule)
    coef = logsumexp([math.log(5.0) + constants.log_D2, math.log(64.0) + constants.log_D + 8.0 * math.log1p(B)])
    if rate > 0.0 and np.isfinite(coef):
        terms.append(float(coef) - math.log(2.0 * constants.mu_F * constants.mu_G) + math.log(rate))
    if not terms:
        return -math.inf
    return float(logsumexp(terms))


def theorem_bound_decimal(
    k: int,
    constants: BoundConstants,
    V_at_Kstar: float,
    schedule: StepSchedule,
    precision: int = 50,
) -> float:
    """The same bound assembled in extended precision and returned as a natural log."""
    if k < constants.Kstar:
        raise ScheduleError(f"bound holds for k >= K* = {constants.Kstar}, got k = {k}")
    ctx = Context(prec=precision, Emax=MAX_EMAX, Emin=MIN_EMIN)
    with localcontext(ctx):
        D = Decimal
        k1 = D(k) + 1
        B = D(constants.B)
        a0, b0 = D(schedule.alpha0), D(schedule.beta0)
        mu_F, mu_G, C = D(constants.mu_F), D(constants.mu_G), D(constants.C)
        total = D(0)
        if constants.Kstar > 0 and V_at_Kstar > 0.0:
            total += D(constants.Kstar) ** 2 * D(V_at_Kstar) / k1**2
        D2 = D(constants.log_D2).exp() if np.isfinite(constants.log_D2) else D(0)
        Dv = D(constants.log_D).exp() if np.isfinite(constants.log_D) else D(0)
        coef = (5 * D2 + 64 * Dv * (1 + B) ** 8) / (2 * mu_F * mu_G)
        scale = k1 ** (D(2) / D(3))
        t1 = (5 * b0**3 + 2 * mu_F * b0 * a0**3) / (mu_F * a0**2) / scale
        t2 = 4 * C * b0 * a0 * (k1 / a0).ln() / scale
        if t1 + t2 > 0:
            total += coef * (t1 + t2)
        if total == 0:
            return -math.inf
        return float(total.ln())


def bound_series(ks, constants: BoundConstants, V_at_Kstar: float, schedule: StepSchedule) -> np.ndarray:
    """
    log of the bound on V_k at each k: the theorem at k − 1 for k > K*.
    At k = K* the same expression reduces to V_{K*} plus the noise terms, so
    the endpoint is included; NaN before K* and at k = 0.
    """
    out = np.full(len(ks), np.nan)
    for i, k in enumerate(ks):
        if k >= max(constants.Kstar, 1):
            out[i] = _log_bound(int(k) - 1, constants, V_at_Kstar, schedule)
    return out
