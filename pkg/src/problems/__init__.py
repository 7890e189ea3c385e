"""Problem definitions: operator pairs, their constants and config loading."""
from src.problems.constants import BEstimate, estimate_B, mean_exact
from src.problems.factory import build_problem, load_problem, load_problem_config, parse_problem
from src.problems.gtd import make_gtd
from src.problems.linear import make_linear
from src.problems.robust_pr import make_robust_pr
from src.problems.schemas import GTDConfig, LinearTTSAConfig, ProblemConfig, RobustPRConfig
from src.problems.spec import ProblemSpec, stationary_mean

__all__ = [
    "BEstimate",
    "GTDConfig",
    "LinearTTSAConfig",
    "ProblemConfig",
    "ProblemSpec",
    "RobustPRConfig",
    "build_problem",
    "estimate_B",
    "load_problem",
    "load_problem_config",
    "make_gtd",
    "make_linear",
    "make_robust_pr",
    "mean_exact",
    "parse_problem",
    "stationary_mean",
]
