"""Step-size schedules, seeding and the two-time-scale iteration engine."""
from src.engine.schedule import StepSchedule, compute_Kstar, tail_step_sum, validate_schedule
from src.engine.seeds import trial_seed, trial_seeds

__all__ = [
    "StepSchedule",
    "compute_Kstar",
    "tail_step_sum",
    "trial_seed",
    "trial_seeds",
    "validate_schedule",
]
