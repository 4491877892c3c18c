from typing import Optional

from pydantic import ConfigDict, Field

from .base import Base


class PrivacyBudget(Base):
    epsilon: float = Field(gt=0)
    delta: float = Field(default=0.0, ge=0, lt=1)

    def split(self, fraction: float) -> "PrivacyBudget":
        """Share of epsilon; delta is carried unchanged."""
        return PrivacyBudget(epsilon=self.epsilon * fraction, delta=self.delta)


class AboveThresholdState(Base):
    """Single-owner state of one AboveThreshold run."""

    model_config = ConfigDict(frozen=False, validate_assignment=True)

    threshold: float
    noisy_threshold: float = Field(frozen=True)
    epsilon: float = Field(gt=0, frozen=True)
    halted: bool = False
    queries_answered: int = Field(default=0, ge=0)
    noise_free: bool = Field(default=False, frozen=True)
    # recorded for analysis only; AboveThreshold is (epsilon, 0)-DP
    failure_probability: Optional[float] = Field(default=None, frozen=True)
