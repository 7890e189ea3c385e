"""
The coupled two-time-scale iteration

    x_{k+1} = x_k − α_k F(x_k, y_k; ξ_k)
    y_{k+1} = y_k − β_k G(x_k, y_k; ξ_k)

run for a batch of independent trials. At step k the noise state advances
ξ_{k−1} → ξ_k first; F and G are then evaluated at the same (x_k, y_k, ξ_k)
and both coordinates are updated from the old iterate.

Per trial the random stream is consumed in a fixed order: x₀, y₀ (radius ×
standard normal), ξ₋₁ from the stationary law, then the transition draws in
chunks. Together with the column-ordered kernels this makes every trial a
pure function of its seed, whatever batch or process it runs in.
"""
from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from src.core.config import Config
from src.core.errors import NonFiniteIterateError
from src.core.logger import setup_logger
from src.engine.schedule import StepSchedule, tau_of
from src.engine.seeds import trial_rngs
from src.noise.sources import NoiseStream
from src.problems.spec import ProblemSpec

logger = setup_logger("engine")


@dataclass
class IterateState:
    k: int
    x: np.ndarray
    y: np.ndarray
    xi: Any


@dataclass
class Trajectory:
    """One trial's checkpoints (k, x, y, ψ, ζ), its seed and final state."""

    checkpoints: list[tuple[int, np.ndarray, np.ndarray, np.ndarray | None, np.ndarray | None]]
    seed: int
    final: IterateState
    metadata: dict[str, Any] = field(default_factory=dict)

    @property
    def ks(self) -> list[int]:
        return [c[0] for c in self.checkpoints]


@dataclass
class Ensemble:
    """
    Checkpointed states of a batch of trials. Arrays are indexed
    [trial, checkpoint, ...]; ``ks`` is shared by all trials.
    """

    ks: np.ndarray
    x: np.ndarray
    y: np.ndarray
    xi: np.ndarray
    seeds: np.ndarray
    psi: np.ndarray | None = None
    zeta: np.ndarray | None = None
    x_lag: np.ndarray | None = None
    y_lag: np.ndarray | None = None
    tau: np.ndarray | None = None
    metadata: dict[str, Any] = field(default_factory=dict)

    @property
    def trials(self) -> int:
        return self.x.shape[0]

    def index_of(self, k: int) -> int:
        pos = int(np.searchsorted(self.ks, k))
        if pos >= len(self.ks) or self.ks[pos] != k:
            raise KeyError(f"k={k} is not a checkpoint")
        return pos

    def trajectory(self, i: int) -> Trajectory:
        checkpoints = []
        for j, k in enumerate(self.ks):
            psi = None if self.psi is None else self.psi[i, j]
            zeta = None if self.zeta is None else self.zeta[i, j]
            checkpoints.append((int(k), self.x[i, j], self.y[i, j], psi, zeta))
        final = IterateState(int(self.ks[-1]), self.x[i, -1], self.y[i, -1], self.xi[i, -1])
        return Trajectory(checkpoints=checkpoints, seed=int(self.seeds[i]), final=final, metadata=dict(self.metadata))

    def truncated(self, m: int) -> Ensemble:
        """The first *m* checkpoints."""

        def cut(a):
            return None if a is None else a[:, :m]

        return Ensemble(
            ks=self.ks[:m],
            x=self.x[:, :m],
            y=self.y[:, :m],
            xi=self.xi[:, :m],
            seeds=self.seeds,
            psi=cut(self.psi),
            zeta=cut(self.zeta),
            x_lag=cut(self.x_lag),
            y_lag=cut(self.y_lag),
            tau=None if self.tau is None else self.tau[:m],
            metadata=dict(self.metadata),
        )

    @staticmethod
    def concatenate(parts: list[Ensemble]) -> Ensemble:
        """Join trial blocks in order."""

        def cat(name):
            arrays = [getattr(p, name) for p in parts]
            return None if arrays[0] is None else np.concatenate(arrays, axis=0)

        first = parts[0]
        return Ensemble(
            ks=first.ks,
            x=cat("x"),
            y=cat("y"),
            xi=cat("xi"),
            seeds=cat("seeds"),
            psi=cat("psi"),
            zeta=cat("zeta"),
            x_lag=cat("x_lag"),
            y_lag=cat("y_lag"),
            tau=first.tau,
            metadata=dict(first.metadata),
        )


# ── Checkpoints ───────────────────────────────────────────────────────────────


def checkpoint_grid(k_max: int, count: int | None = None, extra=()) -> np.ndarray:
    """
    About *count* log-spaced k in [0, k_max], always containing 0 and k_max,
    merged with any *extra* values that fall in range.
    """
    count = Config.CHECKPOINTS if count is None else count
    if k_max <= 0:
        return np.array([0], dtype=np.int64)
    logs = np.floor(np.geomspace(1, k_max + 1, max(count, 2))).astype(np.int64) - 1
    ks = np.concatenate([[0, k_max], logs, np.asarray(list(extra), dtype=np.int64)])
    ks = ks[(ks >= 0) & (ks <= k_max)]
    return np.unique(ks)


def with_successors(ks) -> list[int]:
    """k and k+1 for each k; the one-step lemma checks need both."""
    out = set()
    for k in ks:
        out.update((int(k), int(k) + 1))
    return sorted(out)


# ── Single step ───────────────────────────────────────────────────────────────


def _update(spec: ProblemSpec, a: float, b: float, x, y, xi):
    return x - a * spec.F_fn(x, y, xi), y - b * spec.G_fn(x, y, xi)


def sa_step(
    state: IterateState,
    spec: ProblemSpec,
    schedule: StepSchedule,
    rng: np.random.Generator,
) -> IterateState:
    """One step of the coupled recursion for a single trajectory."""
    draws = spec.noise.sample_draws(rng, 1)
    xi = spec.noise.advance(np.asarray(state.xi)[None, ...], draws)
    x, y = np.asarray(state.x, dtype=float)[None], np.asarray(state.y, dtype=float)[None]
    x_new, y_new = _update(spec, schedule.alpha(state.k), schedule.beta(state.k), x, y, xi)
    if not (np.isfinite(x_new).all() and np.isfinite(y_new).all()):
        raise NonFiniteIterateError(state.k + 1, None)
    return IterateState(k=state.k + 1, x=x_new[0], y=y_new[0], xi=xi[0])


# ── Ensemble runner ───────────────────────────────────────────────────────────


def _init_radius(spec: ProblemSpec) -> float:
    return float(getattr(spec.config, "init_radius", 1.0))


def _simulate(
    spec: ProblemSpec,
    schedule: StepSchedule,
    k_max: int,
    seeds: np.ndarray,
    grid: np.ndarray,
    C: float | None,
    x0: np.ndarray | None,
    y0: np.ndarray | None,
) -> Ensemble:
    n = len(seeds)
    m = len(grid)
    rngs = trial_rngs(seeds)
    radius = _init_radius(spec)
    x = np.stack([radius * g.standard_normal(spec.d_x) for g in rngs]) if n else np.zeros((0, spec.d_x))
    y = np.stack([radius * g.standard_normal(spec.d_y) for g in rngs]) if n else np.zeros((0, spec.d_y))
    if x0 is not None:
        x = np.tile(np.asarray(x0, dtype=float), (n, 1))
    if y0 is not None:
        y = np.tile(np.asarray(y0, dtype=float), (n, 1))
    xi = spec.noise.initial_states(rngs)
    stream = NoiseStream(spec.noise, rngs)

    record_noise = spec.has_means
    out = Ensemble(
        ks=grid,
        x=np.empty((n, m, spec.d_x)),
        y=np.empty((n, m, spec.d_y)),
        xi=np.empty((n, m, *xi.shape[1:]), dtype=xi.dtype),
        seeds=np.asarray(seeds, dtype=np.uint64),
        psi=np.empty((n, m, spec.d_x)) if record_noise else None,
        zeta=np.empty((n, m, spec.d_y)) if record_noise else None,
        metadata={
            "xi0": "stationary",
            "init_radius": radius,
            "x0_fixed": x0 is not None,
            "y0_fixed": y0 is not None,
        },
    )

    # lagged states z_{k−τ(α_k)} come from a ring of the last W iterates
    if C is not None:
        taus = tau_of(schedule.alphas(grid), C, grid)
        window = int(taus.max()) + 1
        ring_x = np.empty((window, n, spec.d_x))
        ring_y = np.empty((window, n, spec.d_y))
        out.tau = taus
        out.x_lag = np.empty((n, m, spec.d_x))
        out.y_lag = np.empty((n, m, spec.d_y))
        out.metadata["lag_C"] = C
    else:
        window = 0

    j = 0
    last_checkpoint = None
    report_every = max(k_max // 10, 1)
    t0 = time.perf_counter()
    for k in range(k_max + 1):
        xi = spec.noise.advance(xi, stream.next())
        if window:
            ring_x[k % window] = x
            ring_y[k % window] = y
        if j < m and grid[j] == k:
            out.x[:, j] = x
            out.y[:, j] = y
            out.xi[:, j] = xi
            if record_noise:
                out.psi[:, j] = spec.F_fn(x, y, xi) - spec.mean_F_fn(x, y)
                out.zeta[:, j] = spec.G_fn(x, y, xi) - spec.mean_G_fn(x, y)
            if window:
                lag = (k - int(out.tau[j])) % window
                out.x_lag[:, j] = ring_x[lag]
                out.y_lag[:, j] = ring_y[lag]
            last_checkpoint = k
            j += 1
        if k == k_max:
            break
        x, y = _update(spec, schedule.alpha(k), schedule.beta(k), x, y, xi)
        if not (np.isfinite(x).all() and np.isfinite(y).all()):
            logger.error(f"non-finite iterate at k={k + 1}; last checkpoint {last_checkpoint}")
            raise NonFiniteIterateError(k + 1, last_checkpoint, partial=out.truncated(j))
        if (k + 1) % report_every == 0:
            logger.debug(f"k={k + 1}/{k_max} ({time.perf_counter() - t0:.1f}s)")
    return out


def _block_worker(payload: dict) -> tuple[str, Any]:
    # runs in a child process; rebuild the problem from its config
    from src.problems.factory import build_problem, parse_problem

    spec = build_problem(parse_problem(payload["config"]))
    try:
        ens = _simulate(
            spec,
            StepSchedule(**payload["schedule"]),
            payload["k_max"],
            payload["seeds"],
            payload["grid"],
            payload["C"],
            payload["x0"],
            payload["y0"],
        )
    except NonFiniteIterateError as e:
        return "nonfinite", (e.k, e.partial)
    return "ok", ens


def _merge_aborted(results: list[tuple[str, Any]], grid: np.ndarray) -> NonFiniteIterateError:
    # the serial run stops at the earliest failing step of any trial
    k = min(value[0] for status, value in results if status == "nonfinite")
    m = int(np.searchsorted(grid, k, side="left"))
    parts = [(value if status == "ok" else value[1]).truncated(m) for status, value in results]
    last = int(grid[m - 1]) if m else None
    logger.error(f"non-finite iterate at k={k}; last checkpoint {last}")
    return NonFiniteIterateError(k, last, partial=Ensemble.concatenate(parts))


def run_ensemble(
    spec: ProblemSpec,
    schedule: StepSchedule,
    k_max: int,
    seeds,
    grid=None,
    *,
    C: float | None = None,
    x0=None,
    y0=None,
    threads: int = 1,
) -> Ensemble:
    """
    Simulate one trial per seed and checkpoint it on *grid*.

    With *C* given, the state z_{k−τ(α_k)} with τ(α_k) = ceil(C log(1/α_k)) is
    kept for every checkpoint. With ``threads > 1`` trials run in contiguous
    blocks on worker processes; the result is identical to a serial run.
    """
    if k_max < 0:
        raise ValueError(f"k_max must be >= 0, got {k_max}")
    seeds = np.asarray(seeds, dtype=np.uint64)
    grid = checkpoint_grid(k_max) if grid is None else np.unique(np.asarray(grid, dtype=np.int64))
    if grid[0] != 0 or grid[-1] != k_max:
        grid = np.unique(np.concatenate([[0, k_max], grid[(grid >= 0) & (grid <= k_max)]]))

    threads = min(threads, len(seeds))
    if threads > 1 and spec.config is None:
        logger.warning(f"{spec.name}: no config to rebuild the problem in workers; running serially")
        threads = 1
    t0 = time.perf_counter()
    if threads <= 1:
        ens = _simulate(spec, schedule, k_max, seeds, grid, C, x0, y0)
    else:
        blocks = np.array_split(seeds, threads)
        payloads = [
            {
                "config": spec.config.model_dump(),
                "schedule": schedule.model_dump(),
                "k_max": k_max,
                "seeds": block,
                "grid": grid,
                "C": C,
                "x0": x0,
                "y0": y0,
            }
            for block in blocks
        ]
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_block_worker, payloads))
        if any(status == "nonfinite" for status, _ in results):
            raise _merge_aborted(results, grid)
        ens = Ensemble.concatenate([value for _, value in results])
    logger.info(
        f"{spec.name}: {len(seeds)} trials x {k_max} steps, {len(grid)} checkpoints, "
        f"{time.perf_counter() - t0:.1f}s"
    )
    return ens


def run_trajectory(
    spec: ProblemSpec,
    schedule: StepSchedule,
    k_max: int,
    seed: int,
    grid=None,
    *,
    C: float | None = None,
) -> Trajectory:
    """Single-trial run; a pure function of (problem, schedule, k_max, seed, grid)."""
    return run_ensemble(spec, schedule, k_max, [seed], grid, C=C).trajectory(0)
