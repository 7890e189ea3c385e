"""
Exception hierarchy for markov-ttsa.

Every error carries a structured payload (``to_dict``) so the CLI can print it
as JSON and pick an exit code without parsing messages.
"""
from __future__ import annotations

from typing import Any


class TTSAError(Exception):
    """Base class for all library errors."""

    exit_code: int = 3

    def __init__(self, message: str, **payload: Any) -> None:
        super().__init__(message)
        self.payload = payload

    def to_dict(self) -> dict[str, Any]:
        return {"error": type(self).__name__, "message": str(self), **self.payload}


# ── Noise ─────────────────────────────────────────────────────────────────────


class ChainValidationError(TTSAError, ValueError):
    """Transition matrix or probability vector is malformed."""


class NonErgodicChainError(TTSAError, ValueError):
    def __init__(self, reason: str) -> None:
        super().__init__(f"chain is not ergodic: {reason}", reason=reason)
        self.reason = reason


class MixingCapExceededError(TTSAError):
    def __init__(self, cap: int, achieved: float) -> None:
        super().__init__(
            f"mixing scan reached cap {cap} with max TV {achieved:.3e}",
            cap=cap,
            achieved=achieved,
        )


class UninitializedSourceError(TTSAError, RuntimeError):
    """A noise source was stepped before its state was set."""


class NoiseNotEnumerableError(TTSAError):
    """Exact stationary expectation requested on a continuous noise source."""


# ── Problems ──────────────────────────────────────────────────────────────────


class ProblemConfigError(TTSAError, ValueError):
    def __init__(self, message: str, field: str = "") -> None:
        super().__init__(message, field=field)
        self.field = field


class MissingCapabilityError(TTSAError):
    def __init__(self, capability: str) -> None:
        super().__init__(f"problem does not expose {capability}", capability=capability)
        self.capability = capability


# ── Engine ────────────────────────────────────────────────────────────────────


class ScheduleError(TTSAError, ValueError):
    """Step-size schedule unusable for the requested computation."""


class KstarNotFoundError(TTSAError):
    def __init__(self, cap: int, achieved_min: float, threshold: float) -> None:
        super().__init__(
            f"no K* within cap {cap}: smallest window product {achieved_min:.3e} "
            f"vs threshold {threshold:.3e}",
            cap=cap,
            achieved_min=achieved_min,
            threshold=threshold,
        )


class NonFiniteIterateError(TTSAError, FloatingPointError):
    exit_code = 2

    def __init__(self, k: int, last_checkpoint: int | None, partial: Any = None) -> None:
        super().__init__(
            f"non-finite iterate at k={k}",
            k=k,
            last_checkpoint=last_checkpoint,
        )
        self.k = k
        self.partial = partial


# ── Analysis ──────────────────────────────────────────────────────────────────


class InsufficientTrialsError(TTSAError, ValueError):
    def __init__(self, trials: int, required: int) -> None:
        super().__init__(
            f"{trials} trials given, at least {required} required",
            trials=trials,
            required=required,
        )


class MissingLagError(TTSAError):
    def __init__(self, k: int) -> None:
        super().__init__(f"no lagged state recorded for checkpoint k={k}", k=k)


class InsufficientCheckpointsError(TTSAError, ValueError):
    def __init__(self, points: int, required: int) -> None:
        super().__init__(
            f"{points} checkpoints in the fit window, at least {required} required",
            points=points,
            required=required,
        )
