"""
Problem configuration schemas.

Config files are JSON; matrices are row-major nested lists. Field names match
the operator notation (A11, b_F, ...). ``kind`` selects the builder.
"""
from __future__ import annotations

from typing import Annotated, Literal

from pydantic import BaseModel, ConfigDict, Field, TypeAdapter

from src.engine.schedule import StepSchedule
from src.noise.chain import ChainConfig

Matrix = list[list[float]]


class _ProblemBase(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    name: str = ""
    schedule: StepSchedule | None = None
    init_radius: float = Field(default=1.0, ge=0.0)


class LinearTTSAConfig(_ProblemBase):
    """F = A11 x + A12 y + c_F + b_F(ξ), G = A21 x + A22 y + c_G + b_G(ξ)."""

    kind: Literal["linear"] = "linear"
    chain: ChainConfig
    A11: Matrix
    A12: Matrix
    A21: Matrix
    A22: Matrix
    b_F: Matrix | None = None
    b_G: Matrix | None = None
    c_F: list[float] | None = None
    c_G: list[float] | None = None


class RobustPRConfig(_ProblemBase):
    """Squared-loss regression on AR data, averaged by the fast iterate."""

    kind: Literal["robust_pr"] = "robust_pr"
    subdiagonal: list[float]
    x_true: list[float] = Field(min_length=1)
    noise_std: float = Field(default=1.0, ge=0.0)
    innovation_std: float = Field(default=1.0, ge=0.0)
    loss: str = "squared"
    estimation_samples: int = Field(default=4096, ge=16)
    estimation_seed: int = 0


class GTDConfig(_ProblemBase):
    """Policy evaluation on a finite MDP with V_y(ζ) = ⟨y, φ₀(ζ)⟩ + (ε/2)⟨y, M(ζ) y⟩."""

    kind: Literal["gtd"] = "gtd"
    chain: ChainConfig
    rewards: list[float]
    gamma: float = Field(gt=0.0)
    features: Matrix
    curvature: list[Matrix]
    epsilon: float = Field(default=0.1, ge=0.0)
    region_radius: float = Field(default=3.0, gt=0.0)
    estimation_samples: int = Field(default=2000, ge=16)
    estimation_seed: int = 0


ProblemConfig = Annotated[
    LinearTTSAConfig | RobustPRConfig | GTDConfig,
    Field(discriminator="kind"),
]

problem_config_adapter: TypeAdapter[ProblemConfig] = TypeAdapter(ProblemConfig)
