from typing import Dict, List, Optional, Union

from pydantic import Field, model_validator

from ..enums import Answer
from .base import Base, Vector
from .privacy import PrivacyBudget
from .stats import EstimatorConfig, RobustStatKind


class ConcentrationConfig(Base):
    tau: float = Field(gt=0)
    upsilon: float
    epsilon_share: float = Field(gt=0)
    failure_probability: Optional[float] = None
    insecure_debug: bool = False


class DpSgdConfig(Base):
    budget: PrivacyBudget
    eta: float = Field(gt=0)
    tau: float = Field(gt=0)
    varsigma: float = Field(ge=0)
    upsilon: float
    batch_users_B: int = Field(ge=1)
    kind: RobustStatKind = RobustStatKind()
    noise_constant: float = Field(default=6.0, ge=0)
    insecure_debug: bool = False
    diagnostics: Dict[str, Union[float, bool]] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _zero_noise_is_debug_only(self) -> "DpSgdConfig":
        if self.noise_constant == 0 and not self.insecure_debug:
            raise ValueError("noise_constant = 0 removes privacy; it requires insecure_debug")
        return self

    def estimator_config(self) -> EstimatorConfig:
        return EstimatorConfig(threshold_varsigma=self.varsigma, kind=self.kind)

    def concentration_config(self, steps: int, n: int, m: int, d: int) -> ConcentrationConfig:
        """The test gets half of epsilon and failure parameter delta / (2 T m n d)."""
        return ConcentrationConfig(
            tau=self.tau,
            upsilon=self.upsilon,
            epsilon_share=self.budget.epsilon / 2,
            failure_probability=self.budget.delta / (2 * steps * m * n * d),
            insecure_debug=self.insecure_debug,
        )


class TrajectoryLog(Base):
    phase: int = 1
    iterates: List[Vector] = Field(default_factory=list)
    gradient_estimates: List[Vector] = Field(default_factory=list)
    scores: List[float] = Field(default_factory=list)
    answers: List[Answer] = Field(default_factory=list)
    passed: bool = False
    discarded_users: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _lengths(self) -> "TrajectoryLog":
        steps = len(self.iterates)
        if len(self.gradient_estimates) != steps or len(self.scores) != steps:
            raise ValueError("iterates, gradient estimates and scores must have one entry per step")
        if len(self.answers) > steps:
            raise ValueError("more test answers than steps")
        return self

    @property
    def steps(self) -> int:
        return len(self.iterates)


class LocalizationResult(Base):
    point: Vector
    phases: List[TrajectoryLog] = Field(default_factory=list)
    sigmas: List[float] = Field(default_factory=list)
    users_used: int = 0
