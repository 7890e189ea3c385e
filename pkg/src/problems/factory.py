"""
Problem configs from JSON: parse by ``kind`` and build the matching ProblemSpec.

Usage:
    spec = load_problem("configs/linear_canonical.json")
"""
import json
from pathlib import Path

from pydantic import ValidationError

from src.core.errors import ProblemConfigError
from src.core.logger import setup_logger
from src.noise.chain import FiniteChain
from src.problems.gtd import make_gtd
from src.problems.linear import make_linear
from src.problems.robust_pr import make_robust_pr
from src.problems.schemas import GTDConfig, LinearTTSAConfig, RobustPRConfig, problem_config_adapter
from src.problems.spec import ProblemSpec

logger = setup_logger("problems")


def build_problem(cfg) -> ProblemSpec:
    """Build the ProblemSpec for a validated problem config."""
    if isinstance(cfg, LinearTTSAConfig):
        chain = FiniteChain.from_config(cfg.chain)
        chain.require_ergodic()
        spec = make_linear(cfg, chain)
    elif isinstance(cfg, RobustPRConfig):
        spec = make_robust_pr(cfg)
    elif isinstance(cfg, GTDConfig):
        spec = make_gtd(cfg)
    else:
        raise ProblemConfigError(f"Unsupported problem config: {type(cfg).__name__}", field="kind")
    logger.info(f"Built problem {spec.name!r} (d_x={spec.d_x}, d_y={spec.d_y})")
    return spec


def parse_problem(data: dict):
    """Validate a raw mapping into a problem config; errors name the offending field."""
    try:
        return problem_config_adapter.validate_python(data)
    except ValidationError as e:
        first = e.errors()[0]
        field = ".".join(str(p) for p in first["loc"])
        raise ProblemConfigError(f"invalid problem config: {first['msg']}", field=field) from e


def load_problem_config(path: str | Path):
    path = Path(path)
    if not path.exists():
        raise ProblemConfigError(f"problem config not found: {path}", field="problem")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ProblemConfigError(f"{path} is not valid JSON: {e}", field="problem") from e
    return parse_problem(data)


def load_problem(path: str | Path) -> ProblemSpec:
    return build_problem(load_problem_config(path))
