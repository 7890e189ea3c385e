"""Experiment harness: CLI, subcommands and output files."""
from src.harness.commands import (
    COMMANDS,
    EnsembleSummary,
    ExperimentConfig,
    cmd_demo_pr,
    cmd_mixing,
    cmd_rate_certify,
    cmd_run,
    cmd_verify_lemmas,
)
from src.harness.exports import ReportWriter

__all__ = [
    "COMMANDS",
    "EnsembleSummary",
    "ExperimentConfig",
    "ReportWriter",
    "cmd_demo_pr",
    "cmd_mixing",
    "cmd_rate_certify",
    "cmd_run",
    "cmd_verify_lemmas",
]
