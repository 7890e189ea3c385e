"""
pytest configuration for markov-ttsa.

Puts the project root on sys.path so `src.*` imports resolve when running
`pytest` from the repository root, and provides the shared problem fixtures.
"""
import sys
from pathlib import Path

import pytest

# Add the repo root to sys.path
ROOT = Path(__file__).parent.parent
sys.path.insert(0, str(ROOT))

from src.noise.chain import ChainConfig, FiniteChain  # noqa: E402
from src.problems.factory import build_problem, load_problem  # noqa: E402
from src.problems.schemas import LinearTTSAConfig  # noqa: E402

CONFIGS = ROOT / "configs"

TWO_STATE_P = [[0.7, 0.3], [0.3, 0.7]]


def scalar_linear_config(**overrides) -> LinearTTSAConfig:
    """d = 1 problem: A11 = 2, A12 = A21 = A22 = 1 on a two-state chain, no noise tables."""
    fields = {
        "name": "scalar",
        "chain": ChainConfig(P=[[0.5, 0.5], [0.5, 0.5]]),
        "A11": [[2.0]],
        "A12": [[1.0]],
        "A21": [[1.0]],
        "A22": [[1.0]],
        "schedule": {"alpha0": 0.1, "beta0": 0.05},
    }
    fields.update(overrides)
    return LinearTTSAConfig(**fields)


@pytest.fixture
def two_state_chain() -> FiniteChain:
    return FiniteChain(TWO_STATE_P)


@pytest.fixture(scope="session")
def canonical():
    return load_problem(CONFIGS / "linear_canonical.json")


@pytest.fixture(scope="session")
def noise_free():
    return load_problem(CONFIGS / "linear_noise_free.json")


@pytest.fixture(scope="session")
def gtd():
    return load_problem(CONFIGS / "gtd_three_state.json")


@pytest.fixture
def scalar():
    return build_problem(scalar_linear_config())
