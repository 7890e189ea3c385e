"""
Subcommands of the experiment harness.

Each ``cmd_*`` function takes a validated ``ExperimentConfig``, writes its
outputs through a ``ReportWriter`` and returns ``(payload, exit_code)``.
Library errors propagate to the CLI, which maps them to exit codes.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Literal

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from src.analysis.bounds import (
    BoundConstants,
    bound_series,
    compute_constants,
    log_D_value,
    lyapunov_weight,
)
from src.analysis.lemmas import (
    MIN_EXPECTATION_TRIALS,
    AsLemmaReport,
    ExpectationReport,
    check_as_lemmas,
    check_expectation_lemmas,
    negative_controls,
)
from src.analysis.rates import RateFit, default_window, fit_rate
from src.analysis.residuals import checkpoint_statistics, trajectory_table
from src.core.config import Config
from src.core.errors import (
    InsufficientCheckpointsError,
    NonFiniteIterateError,
    ProblemConfigError,
    ScheduleError,
)
from src.core.kernels import sq_norm
from src.core.logger import setup_logger
from src.core.run_events import EventComponent, EventPhase, log_phase
from src.engine.iteration import Ensemble, checkpoint_grid, run_ensemble, with_successors
from src.engine.schedule import ScheduleReport, StepSchedule, validate_schedule
from src.engine.seeds import trial_seeds
from src.harness.console import ConsoleReporter
from src.harness.exports import ReportWriter
from src.noise.chain import bias_profile, fit_mixing_constant, mixing_time, tv_profile
from src.noise.sources import ARSource, FiniteChainSource
from src.problems.assumptions import AssumptionReport, check_assumptions
from src.problems.factory import load_problem
from src.problems.schemas import RobustPRConfig
from src.problems.spec import ProblemSpec

logger = setup_logger("harness")

LN10 = math.log(10.0)
MIXING_GRID = (1e-1, 1e-2, 1e-3, 1e-4)
# ball for the sampled assumption checks when the problem names no region
ASSUMPTION_RADIUS = 2.0


# ── Experiment config ─────────────────────────────────────────────────────────


class ExperimentConfig(BaseModel):
    """One experiment: a problem file plus run parameters."""

    model_config = ConfigDict(extra="forbid")

    problem: Path
    alpha0: float | None = Field(default=None, gt=0.0)
    beta0: float | None = Field(default=None, gt=0.0)
    k_max: int = Field(default=100_000, ge=0)
    trials: int = Field(default=100, ge=1)
    seed: int = Field(default_factory=lambda: Config.SEED, ge=0)
    checkpoints: int = Field(default_factory=lambda: Config.CHECKPOINTS, ge=2)
    out: Path = Field(default_factory=lambda: Path(Config.OUTPUT_DIR))
    threads: int = Field(default_factory=lambda: Config.THREADS, ge=1)
    negative_control: bool = False
    lemma_k_count: int = Field(default=5, ge=1)
    mixing_horizon: int | None = Field(default=None, ge=1)


class CheckpointStat(BaseModel):
    k: int
    mean_xhat_sq: float | None
    se_xhat_sq: float | None
    mean_yhat_sq: float | None
    se_yhat_sq: float | None
    V_k: float | None
    se_V_k: float | None
    log10_bound: float | None = None


class EnsembleSummary(BaseModel):
    """Aggregate of one ensemble run; serialized as ``summary.json``."""

    command: str
    problem: str
    status: Literal["ok", "aborted"] = "ok"
    trials: int
    k_max: int
    seed: int
    schedule: StepSchedule
    schedule_report: ScheduleReport | None = None
    constants: dict[str, Any] | None = None
    constants_estimated: bool = False
    checkpoints: list[CheckpointStat] = Field(default_factory=list)
    rate_fit: RateFit | None = None
    bound_dominated: bool | None = None
    assumptions: dict[str, Any] | None = None
    empirical_constants: dict[str, Any] | None = None
    certification: dict[str, Any] | None = None
    lemmas: dict[str, Any] | None = None
    abort: dict[str, Any] | None = None


# ── Shared steps ──────────────────────────────────────────────────────────────


def resolve_schedule(spec: ProblemSpec, cfg: ExperimentConfig) -> StepSchedule:
    """Problem schedule with the experiment's α₀/β₀ overrides applied."""
    base = getattr(spec.config, "schedule", None)
    if base is None:
        if cfg.alpha0 is None or cfg.beta0 is None:
            raise ProblemConfigError(
                "no schedule in the problem config; pass alpha0 and beta0", field="schedule"
            )
        return StepSchedule(alpha0=cfg.alpha0, beta0=cfg.beta0)
    update = {k: v for k, v in (("alpha0", cfg.alpha0), ("beta0", cfg.beta0)) if v is not None}
    return base.model_copy(update=update) if update else base


def lemma_points(Kstar: int, k_max: int, count: int) -> list[int]:
    """Up to *count* log-spaced k in [K*, k_max − 1]; k+1 must also be simulated."""
    hi = k_max - 1
    lo = max(Kstar, 1)
    if hi < Kstar:
        return []
    if hi <= lo:
        return [hi]
    ks = np.unique(np.floor(np.geomspace(lo, hi, count)).astype(np.int64))
    return [int(k) for k in ks if Kstar <= k <= hi]


@dataclass
class _Prepared:
    spec: ProblemSpec
    schedule: StepSchedule
    constants: BoundConstants
    grid: np.ndarray
    lemma_ks: list[int]
    assumptions: AssumptionReport


def _prepare(cfg: ExperimentConfig, with_lemmas: bool) -> _Prepared:
    spec = load_problem(cfg.problem)
    spec.require("H")
    spec.require("fixed_point")
    schedule = resolve_schedule(spec, cfg)
    log_phase(EventPhase.SETUP, EventComponent.PROBLEMS, "problem_loaded", problem=spec.name)
    constants = compute_constants(spec, schedule)
    radius = float(spec.notes.get("region_radius", ASSUMPTION_RADIUS))
    assumptions = check_assumptions(spec, constants.B, radius=radius)
    log_phase(
        EventPhase.SETUP,
        EventComponent.PROBLEMS,
        "assumptions_checked",
        radius=radius,
        passed=assumptions.passed,
        failures=assumptions.failures(),
    )
    lemma_ks = lemma_points(constants.Kstar, cfg.k_max, cfg.lemma_k_count) if with_lemmas else []
    extra = [constants.Kstar, *with_successors(lemma_ks)]
    grid = checkpoint_grid(cfg.k_max, cfg.checkpoints, extra=extra)
    log_phase(
        EventPhase.SETUP,
        EventComponent.ANALYSIS,
        "constants_computed",
        Kstar=constants.Kstar,
        B=constants.B,
        C=constants.C,
    )
    return _Prepared(
        spec=spec,
        schedule=schedule,
        constants=constants,
        grid=grid,
        lemma_ks=lemma_ks,
        assumptions=assumptions,
    )


def _simulate(cfg: ExperimentConfig, prep: _Prepared, writer: ReportWriter) -> Ensemble:
    seeds = trial_seeds(cfg.seed, cfg.trials)
    log_phase(EventPhase.SIMULATION, EventComponent.ENGINE, "started", trials=cfg.trials, k_max=cfg.k_max)
    t0 = time.perf_counter()
    try:
        ens = run_ensemble(
            prep.spec,
            prep.schedule,
            cfg.k_max,
            seeds,
            prep.grid,
            C=prep.constants.C,
            threads=cfg.threads,
        )
    except NonFiniteIterateError as e:
        _write_partial(cfg, prep, writer, e)
        raise
    log_phase(
        EventPhase.SIMULATION,
        EventComponent.ENGINE,
        "finished",
        seconds=round(time.perf_counter() - t0, 3),
    )
    return ens


def _with_initial_residual(prep: _Prepared, ens: Ensemble) -> BoundConstants:
    """Recompute log D from the realized mean ‖ẑ₀‖²."""
    j = ens.index_of(0)
    x0, y0 = ens.x[:, j], ens.y[:, j]
    zhat0 = float((sq_norm(x0 - prep.spec.H_fn(y0)) + sq_norm(y0 - prep.spec.y_star)).mean())
    c = prep.constants
    return c.model_copy(
        update={"zhat0_sq_mean": zhat0, "log_D": log_D_value(zhat0, c.D1, c.log_D2, c.B)}
    )


def _series(prep: _Prepared, constants: BoundConstants, ens: Ensemble) -> pd.DataFrame:
    weights = lyapunov_weight(ens.ks, prep.schedule, constants.B, constants.mu_F, constants.mu_G)
    stats = checkpoint_statistics(prep.spec, ens, np.asarray(weights, dtype=float))
    if constants.Kstar in set(int(k) for k in ens.ks):
        V_at_Kstar = float(stats.loc[stats["k"] == constants.Kstar, "V_k"].iloc[0])
        stats["log10_bound"] = bound_series(ens.ks, constants, V_at_Kstar, prep.schedule) / LN10
    else:
        stats["log10_bound"] = np.nan
    return stats


def _bound_dominated(stats: pd.DataFrame) -> bool | None:
    claimed = stats[np.isfinite(stats["log10_bound"])]
    if claimed.empty:
        return None
    V = claimed["V_k"].to_numpy()
    with np.errstate(divide="ignore"):
        log10_V = np.where(V > 0.0, np.log10(np.maximum(V, np.finfo(float).tiny)), -np.inf)
    return bool(np.all(log10_V <= claimed["log10_bound"].to_numpy()))


def _rate(stats: pd.DataFrame, Kstar: int, k_max: int) -> RateFit | None:
    k_lo, k_hi = default_window(Kstar, k_max)
    try:
        return fit_rate(zip(stats["k"], stats["V_k"], strict=True), k_lo, k_hi)
    except (InsufficientCheckpointsError, ValueError) as e:
        logger.warning(f"no rate fit on [{k_lo}, {k_hi}]: {e}")
        return None


def _checkpoint_stats(stats: pd.DataFrame) -> list[CheckpointStat]:
    rows = []
    for rec in stats.to_dict(orient="records"):
        values = {
            key: (None if not math.isfinite(float(v)) else float(v)) for key, v in rec.items() if key != "k"
        }
        rows.append(CheckpointStat(k=int(rec["k"]), **values))
    return rows


def _series_frame(stats: pd.DataFrame) -> pd.DataFrame:
    return stats[["k", "V_k", "mean_xhat_sq", "mean_yhat_sq", "log10_bound"]]


def _summary(
    command: str,
    cfg: ExperimentConfig,
    prep: _Prepared,
    constants: BoundConstants,
    stats: pd.DataFrame,
    **fields: Any,
) -> EnsembleSummary:
    estimated = prep.spec.notes.get("empirical_constants")
    return EnsembleSummary(
        command=command,
        problem=prep.spec.name,
        trials=cfg.trials,
        k_max=cfg.k_max,
        seed=cfg.seed,
        schedule=prep.schedule,
        schedule_report=validate_schedule(prep.schedule, constants.mu_F, constants.mu_G, constants.B),
        constants=constants.report(),
        constants_estimated=prep.spec.constants_estimated,
        checkpoints=_checkpoint_stats(stats),
        assumptions=prep.assumptions.model_dump(),
        empirical_constants=None if estimated is None else estimated.model_dump(),
        **fields,
    )


def _write_partial(cfg: ExperimentConfig, prep: _Prepared, writer: ReportWriter, err: NonFiniteIterateError) -> None:
    partial = err.partial
    stats = pd.DataFrame(columns=["k", "V_k", "mean_xhat_sq", "mean_yhat_sq", "log10_bound"])
    if partial is not None and len(partial.ks):
        stats = _series(prep, prep.constants, partial)
        writer.write_frame("series.csv", _series_frame(stats))
    summary = _summary(
        writer.manifest.command,
        cfg,
        prep,
        prep.constants,
        stats,
        status="aborted",
        abort=err.to_dict(),
    )
    writer.write_summary(summary.model_dump(mode="json"))
    writer.finalize()
    log_phase(EventPhase.SIMULATION, EventComponent.ENGINE, "aborted", k=err.k)


# ── Commands ──────────────────────────────────────────────────────────────────


def _certification(summary: EnsembleSummary) -> dict[str, Any]:
    """Rate-certification verdict; refused outright when a required schedule check fails."""
    failures = summary.schedule_report.failures() if summary.schedule_report is not None else []
    rate = summary.rate_fit
    in_band = rate is not None and rate.in_band(Config.RATE_SLOPE_MIN, Config.RATE_SLOPE_MAX, Config.RATE_MIN_R2)
    dominated = summary.bound_dominated is not False
    return {
        "refused": bool(failures),
        "schedule_failures": failures,
        "slope_band": [Config.RATE_SLOPE_MIN, Config.RATE_SLOPE_MAX],
        "min_r2": Config.RATE_MIN_R2,
        "in_band": in_band,
        "bound_dominated": dominated,
        "passed": not failures and in_band and dominated,
    }


def cmd_run(
    cfg: ExperimentConfig, console: ConsoleReporter | None = None, certify: bool = False
) -> tuple[EnsembleSummary, int]:
    """
    Simulate the ensemble and write series, trajectories, constants and summary.
    With *certify* the summary also carries the rate-certification verdict.
    """
    console = console or ConsoleReporter()
    t0 = time.perf_counter()
    command = "rate-certify" if certify else "run"
    writer = ReportWriter(cfg.out, command, seed=cfg.seed, trials=cfg.trials, k_max=cfg.k_max)
    prep = _prepare(cfg, with_lemmas=False)
    console.banner(command, problem=prep.spec.name, trials=cfg.trials, k_max=cfg.k_max, Kstar=prep.constants.Kstar)
    ens = _simulate(cfg, prep, writer)

    log_phase(EventPhase.ANALYSIS, EventComponent.ANALYSIS, "aggregate")
    constants = _with_initial_residual(prep, ens)
    stats = _series(prep, constants, ens)
    rate = _rate(stats, constants.Kstar, cfg.k_max)
    dominated = _bound_dominated(stats)
    summary = _summary(
        command,
        cfg,
        prep,
        constants,
        stats,
        rate_fit=rate,
        bound_dominated=dominated,
    )
    if certify:
        summary.certification = _certification(summary)

    log_phase(
        EventPhase.EXPORT,
        EventComponent.FILESYSTEM,
        "write",
        seconds=round(time.perf_counter() - t0, 3),
    )
    writer.write_frame("series.csv", _series_frame(stats))
    writer.write_frame("trajectories.csv", trajectory_table(prep.spec, ens))
    writer.write_json("constants.json", {**constants.report(), "B_terms": constants.B_terms})
    writer.write_summary(summary.model_dump(mode="json"))
    writer.finalize()

    if rate is not None:
        console.info(f"slope {rate.slope:.4f} (r2 {rate.r2:.4f}) on k in {list(rate.k_window)}")
    if dominated is not None:
        console.status("theorem bound dominates V_k", dominated)
    console.files(writer.written)
    return summary, 0


def cmd_rate_certify(
    cfg: ExperimentConfig, console: ConsoleReporter | None = None
) -> tuple[EnsembleSummary, int]:
    """
    Run, then exit 0 iff the slope is in band and the bound dominates every V_k
    past K*. A schedule that fails validation is still simulated and written,
    but certification is refused with a ``ScheduleError``.
    """
    console = console or ConsoleReporter()
    summary, _ = cmd_run(cfg, console, certify=True)
    verdict = summary.certification
    if verdict["refused"]:
        console.status("schedule validation", False, f"failed checks {verdict['schedule_failures']}")
        raise ScheduleError(
            "rate certification refused: schedule validation failed",
            failures=verdict["schedule_failures"],
        )
    rate = summary.rate_fit
    detail = (
        f"slope {rate.slope:.4f} in [{Config.RATE_SLOPE_MIN}, {Config.RATE_SLOPE_MAX}], "
        f"r2 {rate.r2:.4f} >= {Config.RATE_MIN_R2}"
        if rate is not None
        else "no fit"
    )
    console.status("rate", verdict["in_band"], detail)
    console.status("bound domination", verdict["bound_dominated"])
    return summary, 0 if verdict["passed"] else 1


def cmd_verify_lemmas(cfg: ExperimentConfig, console: ConsoleReporter | None = None) -> tuple[dict, int]:
    """
    Almost-sure checks on every path at every checkpoint past K*, and the
    expectation checks when there are enough trials. With ``negative_control``
    the checks run on corrupted constants and are expected to fail.
    """
    console = console or ConsoleReporter()
    t0 = time.perf_counter()
    writer = ReportWriter(cfg.out, "verify-lemmas", seed=cfg.seed, trials=cfg.trials, k_max=cfg.k_max)
    prep = _prepare(cfg, with_lemmas=True)
    console.banner(
        "verify-lemmas",
        problem=prep.spec.name,
        trials=cfg.trials,
        k_max=cfg.k_max,
        Kstar=prep.constants.Kstar,
        negative_control=cfg.negative_control,
    )
    ens = _simulate(cfg, prep, writer)
    constants = _with_initial_residual(prep, ens)

    log_phase(EventPhase.ANALYSIS, EventComponent.ANALYSIS, "almost_sure")
    B_factor = Config.NEGATIVE_B_FACTOR if cfg.negative_control else 1.0
    mu_factor = Config.NEGATIVE_MU_FACTOR if cfg.negative_control else 1.0
    as_report: AsLemmaReport = check_as_lemmas(prep.spec, ens, constants, prep.schedule, B_factor=B_factor)

    ex_report: ExpectationReport | None = None
    if cfg.trials >= MIN_EXPECTATION_TRIALS:
        log_phase(EventPhase.ANALYSIS, EventComponent.ANALYSIS, "expectation")
        ex_report = check_expectation_lemmas(
            prep.spec, ens, constants, prep.schedule, prep.lemma_ks, mu_F_factor=mu_factor
        )
    else:
        console.warn(
            f"{cfg.trials} trials < {MIN_EXPECTATION_TRIALS}: expectation checks skipped"
        )
        logger.warning(f"expectation checks skipped with {cfg.trials} trials")

    controls = None
    if not cfg.negative_control:
        controls = negative_controls(prep.spec, ens, constants, prep.schedule, prep.lemma_ks)

    passed = as_report.passed and (ex_report is None or ex_report.passed)
    report = {
        "problem": prep.spec.name,
        "trials": cfg.trials,
        "k_max": cfg.k_max,
        "Kstar": constants.Kstar,
        "negative_control": cfg.negative_control,
        "passed": passed,
        "almost_sure": {
            "passed": as_report.passed,
            "pass_rate": as_report.pass_rate,
            "B_used": as_report.B_used,
            "rows": [r.model_dump() for r in as_report.rows],
        },
        "expectation": None
        if ex_report is None
        else {
            "passed": ex_report.passed,
            "slack": ex_report.slack,
            "mu_F_used": ex_report.mu_F_used,
            "k_list": prep.lemma_ks,
            "rows": [r.model_dump() for r in ex_report.rows],
        },
        "controls_caught": controls,
    }

    stats = _series(prep, constants, ens)
    summary = _summary(
        "verify-lemmas",
        cfg,
        prep,
        constants,
        stats,
        bound_dominated=_bound_dominated(stats),
        lemmas={
            "passed": passed,
            "almost_sure_pass_rate": as_report.pass_rate,
            "expectation_passed": None if ex_report is None else ex_report.passed,
            "negative_control": cfg.negative_control,
        },
    )
    log_phase(EventPhase.EXPORT, EventComponent.FILESYSTEM, "write", seconds=round(time.perf_counter() - t0, 3))
    writer.write_frame("series.csv", _series_frame(stats))
    writer.write_json("lemmas.json", report)
    writer.write_json("constants.json", {**constants.report(), "B_terms": constants.B_terms})
    writer.write_summary(summary.model_dump(mode="json"))
    writer.finalize()

    console.status(
        "almost-sure inequalities",
        as_report.passed,
        f"pass rate {as_report.pass_rate:.4f}; failures {len(as_report.failures())}",
    )
    if ex_report is not None:
        console.status("expectation inequalities", ex_report.passed, f"failures {ex_report.failures()}")
    if controls:
        for name, caught in controls.items():
            console.status(f"negative control {name} caught", caught)
    console.files(writer.written)
    return report, 0 if passed else 1


def cmd_demo_pr(cfg: ExperimentConfig, console: ConsoleReporter | None = None) -> tuple[dict, int]:
    """Averaged vs last iterate of SGD on autoregressive regression data."""
    console = console or ConsoleReporter()
    t0 = time.perf_counter()
    spec = load_problem(cfg.problem)
    if not isinstance(spec.config, RobustPRConfig):
        raise ProblemConfigError("demo-pr needs a robust_pr problem", field="kind")
    schedule = resolve_schedule(spec, cfg)
    console.banner("demo-pr", problem=spec.name, trials=cfg.trials, k_max=cfg.k_max)
    writer = ReportWriter(cfg.out, "demo-pr", seed=cfg.seed, trials=cfg.trials, k_max=cfg.k_max)

    seeds = trial_seeds(cfg.seed, cfg.trials)
    grid = checkpoint_grid(cfg.k_max, cfg.checkpoints)
    log_phase(EventPhase.SIMULATION, EventComponent.ENGINE, "started", trials=cfg.trials, k_max=cfg.k_max)
    ens = run_ensemble(spec, schedule, cfg.k_max, seeds, grid, threads=cfg.threads)

    x_true = spec.x_star
    j = ens.index_of(cfg.k_max)
    avg_err = np.linalg.norm(ens.x[:, j] - x_true, axis=1)
    last_err = np.linalg.norm(ens.y[:, j] - x_true, axis=1)
    report = {
        "problem": spec.name,
        "trials": cfg.trials,
        "k_max": cfg.k_max,
        "schedule": schedule.model_dump(),
        "per_trial": [
            {"trial": i, "averaged_error": float(a), "last_error": float(b)}
            for i, (a, b) in enumerate(zip(avg_err, last_err, strict=True))
        ],
        "mean_averaged_error": float(avg_err.mean()),
        "mean_last_error": float(last_err.mean()),
        "mse_averaged": float((avg_err**2).mean()),
        "mse_last": float((last_err**2).mean()),
    }
    log_phase(EventPhase.EXPORT, EventComponent.FILESYSTEM, "write", seconds=round(time.perf_counter() - t0, 3))
    writer.write_json("demo_pr.json", report)
    writer.write_frame("trajectories.csv", trajectory_table(spec, ens))
    writer.finalize()

    console.info(f"averaged-iterate MSE {report['mse_averaged']:.6g}")
    console.info(f"last-iterate MSE     {report['mse_last']:.6g}")
    console.files(writer.written)
    return report, 0


def cmd_mixing(cfg: ExperimentConfig, console: ConsoleReporter | None = None) -> tuple[dict, int]:
    """TV and bias profiles plus the fitted mixing constant of the problem's noise."""
    console = console or ConsoleReporter()
    spec = load_problem(cfg.problem)
    writer = ReportWriter(cfg.out, "mixing")
    console.banner("mixing", problem=spec.name)
    log_phase(EventPhase.ANALYSIS, EventComponent.NOISE, "mixing")

    if isinstance(spec.noise, ARSource):
        surrogate = spec.noise.mixing_surrogate()
        report = {"problem": spec.name, "noise": "autoregressive", "surrogate": surrogate.model_dump()}
        console.warn(surrogate.caveat)
    elif isinstance(spec.noise, FiniteChainSource):
        chain = spec.noise.chain
        profile = fit_mixing_constant(chain, MIXING_GRID)
        horizon = cfg.mixing_horizon or 2 * mixing_time(chain, MIXING_GRID[-1]) + 1
        states = spec.noise.enumerate_states()
        n = len(states)
        f_table = spec.F_fn(np.zeros((n, spec.d_x)), np.zeros((n, spec.d_y)), states)
        writer.write_profile("tv_profile.csv", tv_profile(chain, horizon))
        writer.write_profile("bias_profile.csv", bias_profile(chain, f_table, horizon))
        report = {
            "problem": spec.name,
            "noise": "finite_chain",
            "states": chain.n,
            "horizon": horizon,
            "profile": profile.model_dump(),
        }
        console.info(f"C = {profile.C:.6g} (r2 {profile.fit_r2:.4f}), tau = {profile.tau_table}")
    else:
        raise ProblemConfigError(f"no mixing diagnostics for {type(spec.noise).__name__}", field="noise")

    writer.write_json("mixing.json", report)
    writer.finalize()
    console.files(writer.written)
    return report, 0


COMMANDS = {
    "run": cmd_run,
    "rate-certify": cmd_rate_certify,
    "verify-lemmas": cmd_verify_lemmas,
    "demo-pr": cmd_demo_pr,
    "mixing": cmd_mixing,
}
