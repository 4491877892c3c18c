from pathlib import Path
from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..enums import Alignment, LossKind, OutputFormat, Pipeline, StatisticKind, Subcommand


class RunConfig(BaseModel):
    """Flat, strictly parsed experiment configuration (unknown keys rejected)."""

    model_config = ConfigDict(extra="forbid", validate_assignment=True)

    subcommand: Subcommand = Subcommand.RUN

    # instance descriptor
    loss: LossKind = LossKind.QUADRATIC
    d: int = Field(default=4, ge=1)
    n: int = Field(default=8192, ge=1)
    m: int = Field(default=16, ge=1)
    beta: float = Field(default=1.0, gt=0)
    radius: float = Field(default=1.0, gt=0)
    noise_std: Optional[float] = Field(default=None, ge=0)
    # replay a dataset file written by save_dataset instead of sampling
    dataset: Optional[Path] = None
    save_dataset: bool = False

    # privacy budget and DpSgdConfig overrides (None means derived)
    epsilon: float = Field(default=1.0, gt=0)
    delta: float = Field(default=1e-6, gt=0, lt=1)
    eta: Optional[float] = Field(default=None, gt=0)
    tau: Optional[float] = Field(default=None, gt=0)
    varsigma: Optional[float] = Field(default=None, ge=0)
    upsilon: Optional[float] = None
    batch_users: Optional[int] = Field(default=None, ge=1)
    statistic: StatisticKind = StatisticKind.MEDIAN
    trim_fraction: float = Field(default=0.25, ge=0, lt=0.5)
    noise_constant: float = Field(default=6.0, ge=0)
    batch_constant: float = Field(default=100.0, gt=0)
    tau_constant: float = Field(default=1.0, gt=0)
    truncation_constant: float = Field(default=3.0, gt=0)
    insecure_debug: bool = False

    seed: int = 0
    output: Optional[Path] = None
    format: OutputFormat = OutputFormat.CSV

    # subcommand specific
    alpha: float = Field(default=1e-3, gt=0, le=0.1)
    grid: List[Tuple[int, int]] = Field(default_factory=lambda: [(1024, 16)])
    seeds: int = Field(default=1, ge=1)
    pipeline: Pipeline = Pipeline.ROBUST
    alignment: Alignment = Alignment.ALIGNED
    swap_user_index: int = Field(default=0, ge=0)
    certify_scale: float = Field(default=1.0, gt=0)

    @field_validator("grid", mode="before")
    @classmethod
    def _parse_grid(cls, value):
        """Accepts "1024x16,2048x16" as well as a list of pairs."""
        if isinstance(value, str):
            pairs = []
            for item in value.split(","):
                item = item.strip()
                if not item:
                    continue
                n, _, m = item.lower().partition("x")
                pairs.append((int(n), int(m)))
            return pairs
        return value

    @field_validator("grid")
    @classmethod
    def _grid_non_empty(cls, value):
        if not value:
            raise ValueError("grid must contain at least one (n, m) point")
        if any(n < 1 or m < 1 for n, m in value):
            raise ValueError("grid points need n, m >= 1")
        return value

    @model_validator(mode="after")
    def _contractivity(self) -> "RunConfig":
        if self.loss == LossKind.QUADRATIC and self.eta is not None and self.eta > 2 / self.beta:
            raise ValueError(
                f"eta={self.eta} violates the contractivity precondition eta <= 2/beta = {2 / self.beta}"
            )
        if self.noise_constant == 0 and not self.insecure_debug:
            raise ValueError("noise_constant = 0 requires insecure_debug")
        return self
