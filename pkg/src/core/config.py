"""
Configuration loader for markov-ttsa.

All settings are read from environment variables (loaded via .env).
Command-line flags and experiment config files take precedence over these values.
"""
from __future__ import annotations

import os

from dotenv import load_dotenv


class Config:
    """Centralised runtime configuration."""

    # ── Output & logging ──────────────────────────────────────────────────────
    OUTPUT_DIR: str = "results"
    LOG_DIR: str = "logs"
    LOG_LEVEL: str = "INFO"

    # ── Simulation ────────────────────────────────────────────────────────────
    THREADS: int = 1
    SEED: int = 20240607
    CHECKPOINTS: int = 200

    # ── Caps for scans and series ─────────────────────────────────────────────
    MIXING_CAP: int = 1_000_000
    KSTAR_CAP: int = 1_000_000
    D1_TERMS: int = 10_000_000

    # ── Acceptance thresholds ─────────────────────────────────────────────────
    RATE_SLOPE_MIN: float = -1.05
    RATE_SLOPE_MAX: float = -0.50
    RATE_MIN_R2: float = 0.95
    SE_SLACK: float = 3.0

    # ── Negative controls ─────────────────────────────────────────────────────
    NEGATIVE_B_FACTOR: float = 0.01
    NEGATIVE_MU_FACTOR: float = 1e8

    @classmethod
    def load(cls) -> None:
        """Load environment variables from .env and populate class attributes."""
        load_dotenv()

        cls.OUTPUT_DIR = os.getenv("TTSA_OUTPUT_DIR", "results")
        cls.LOG_DIR = os.getenv("TTSA_LOG_DIR", "logs")
        cls.LOG_LEVEL = os.getenv("TTSA_LOG_LEVEL", "INFO").upper()

        cls.THREADS = int(os.getenv("TTSA_THREADS", "1"))
        cls.SEED = int(os.getenv("TTSA_SEED", "20240607"))
        cls.CHECKPOINTS = int(os.getenv("TTSA_CHECKPOINTS", "200"))

        cls.MIXING_CAP = int(os.getenv("TTSA_MIXING_CAP", "1000000"))
        cls.KSTAR_CAP = int(os.getenv("TTSA_KSTAR_CAP", "1000000"))
        cls.D1_TERMS = int(os.getenv("TTSA_D1_TERMS", "10000000"))

        cls.RATE_SLOPE_MIN = float(os.getenv("TTSA_RATE_SLOPE_MIN", "-1.05"))
        cls.RATE_SLOPE_MAX = float(os.getenv("TTSA_RATE_SLOPE_MAX", "-0.50"))
        cls.RATE_MIN_R2 = float(os.getenv("TTSA_RATE_MIN_R2", "0.95"))
        cls.SE_SLACK = float(os.getenv("TTSA_SE_SLACK", "3.0"))

        cls.NEGATIVE_B_FACTOR = float(os.getenv("TTSA_NEGATIVE_B_FACTOR", "0.01"))
        cls.NEGATIVE_MU_FACTOR = float(os.getenv("TTSA_NEGATIVE_MU_FACTOR", "1e8"))


# Populated on import so modules can read Config.SEED etc. at call time.
Config.load()
