"""
Run event log.

Tracks the lifecycle of a CLI invocation (setup, simulation, analysis,
export) as structured events and persists them as JSONL next to the outputs.
"""
from __future__ import annotations

import uuid
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Any

from pydantic import BaseModel, Field

from src.core.logger import setup_logger

logger = setup_logger("events")


class EventPhase(str, Enum):
    """Run phases"""
    SETUP = "setup"
    SIMULATION = "simulation"
    ANALYSIS = "analysis"
    EXPORT = "export"


class EventComponent(str, Enum):
    """Emitting components"""
    HARNESS = "harness"
    ENGINE = "engine"
    NOISE = "noise"
    PROBLEMS = "problems"
    ANALYSIS = "analysis"
    FILESYSTEM = "filesystem"


class RunEvent(BaseModel):
    """Structured run event"""
    event_id: str = Field(default_factory=lambda: str(uuid.uuid4()))
    timestamp: datetime = Field(default_factory=datetime.now)
    session_id: str = "default"
    event_type: str
    phase: EventPhase
    component: EventComponent
    action: str
    description: str = ""
    metadata: dict[str, Any] = Field(default_factory=dict)
    duration_ms: int | None = None


class RunEventLog:
    """Singleton log of run events for the current process."""

    _instance: RunEventLog | None = None

    def __new__(cls) -> RunEventLog:
        if cls._instance is None:
            cls._instance = super().__new__(cls)
            cls._instance._events = []
            cls._instance._session_id = "default"
            cls._instance._persist_file = None
        return cls._instance

    @classmethod
    def start_session(cls, out_dir: str | Path | None = None, session_id: str | None = None) -> str:
        """Start a new session; events are appended to ``<out_dir>/events.jsonl``."""
        instance = cls()
        instance._session_id = session_id or f"run_{datetime.now().strftime('%Y%m%d_%H%M%S')}"
        instance._events = []
        if out_dir is not None:
            out = Path(out_dir)
            out.mkdir(parents=True, exist_ok=True)
            instance._persist_file = out / "events.jsonl"
        else:
            instance._persist_file = None
        logger.debug(f"Session started: {instance._session_id}")
        return instance._session_id

    @classmethod
    def log_event(
        cls,
        event_type: str,
        phase: EventPhase,
        component: EventComponent,
        action: str,
        description: str = "",
        metadata: dict[str, Any] | None = None,
        duration_ms: int | None = None,
    ) -> RunEvent:
        """Record an event and persist it when a session directory is set."""
        instance = cls()
        event = RunEvent(
            session_id=instance._session_id,
            event_type=event_type,
            phase=phase,
            component=component,
            action=action,
            description=description,
            metadata=metadata or {},
            duration_ms=duration_ms,
        )
        instance._events.append(event)
        instance._persist_event(event)
        logger.debug(f"Event: {event_type} - {action}")
        return event

    def _persist_event(self, event: RunEvent) -> None:
        if self._persist_file is None:
            return
        try:
            with open(self._persist_file, "a") as f:
                f.write(event.model_dump_json() + "\n")
        except OSError as e:
            logger.warning(f"Failed to persist event: {e}")

    @classmethod
    def get_events(cls, phase: EventPhase | None = None) -> list[RunEvent]:
        """Events of the current session in emission order."""
        instance = cls()
        if phase is None:
            return list(instance._events)
        return [e for e in instance._events if e.phase == phase]

    @classmethod
    def current_session(cls) -> str:
        return cls()._session_id


def log_phase(phase: EventPhase, component: EventComponent, action: str, **metadata: Any) -> RunEvent:
    """Convenience wrapper used by the harness."""
    return RunEventLog.log_event(
        event_type=f"{phase.value}_{action}",
        phase=phase,
        component=component,
        action=action,
        metadata=metadata,
    )
