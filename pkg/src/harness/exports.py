"""
Report writer

Writes the CSV and JSON outputs of a command into one directory and records
each file in the output manifest.
"""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from src.core.logger import setup_logger
from src.harness.manifest import OutputManifest

logger = setup_logger("harness")

SCHEMA_DIR = Path(__file__).resolve().parents[2] / "schemas"
SUMMARY_SCHEMA = SCHEMA_DIR / "summary.schema.json"

# shortest repr that re-parses to the same double
FLOAT_FORMAT = "%.17g"


def finite_or_none(value: Any) -> Any:
    """Recursively replace NaN/inf by None and numpy scalars by Python ones."""
    if isinstance(value, dict):
        return {str(k): finite_or_none(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [finite_or_none(v) for v in value]
    if isinstance(value, np.ndarray):
        return finite_or_none(value.tolist())
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def validate_summary(payload: dict) -> None:
    """Validate a summary document against the shipped JSON schema."""
    import jsonschema

    schema = json.loads(SUMMARY_SCHEMA.read_text(encoding="utf-8"))
    jsonschema.validate(instance=payload, schema=schema)


class ReportWriter:
    """Single writer for one output directory."""

    def __init__(self, out_dir: str | Path, command: str, **metadata: Any) -> None:
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.manifest = OutputManifest(self.out_dir, command, **metadata)
        self.written: list[Path] = []

    # ── Public API ────────────────────────────────────────────────────────────

    def write_frame(self, name: str, frame: pd.DataFrame) -> Path:
        path = self.out_dir / name
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        return self._record(path)

    def write_profile(self, name: str, values: np.ndarray) -> Path:
        """A (k, value) CSV for k = 0..len(values)-1."""
        frame = pd.DataFrame({"k": np.arange(len(values)), "value": np.asarray(values, dtype=float)})
        return self.write_frame(name, frame)

    def write_json(self, name: str, payload: Any) -> Path:
        path = self.out_dir / name
        text = json.dumps(finite_or_none(payload), indent=2, allow_nan=False, default=str)
        path.write_text(text + "\n", encoding="utf-8")
        return self._record(path)

    def write_summary(self, payload: dict) -> Path:
        clean = finite_or_none(payload)
        validate_summary(clean)
        return self.write_json("summary.json", clean)

    def finalize(self) -> Path:
        path = self.manifest.write()
        logger.info(f"wrote {len(self.written)} files to {self.out_dir}")
        return path

    # ── Private helpers ───────────────────────────────────────────────────────

    def _record(self, path: Path) -> Path:
        self.manifest.add(path)
        self.written.append(path)
        logger.debug(f"wrote {path}")
        return path
