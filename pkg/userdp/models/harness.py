from typing import List, Optional

from pydantic import Field

from ..enums import Alignment, Pipeline
from .base import Base
from .problem import UserRecord

GAP_TOLERANCE = 1e-9


class NeighborSpec(Base):
    swap_user_index: int = Field(ge=0)
    replacement: Optional[UserRecord] = None
    alignment: Alignment = Alignment.UNCONSTRAINED
    # radius of the common ball; defaults to 1 / tau when building pairs
    rho: Optional[float] = Field(default=None, gt=0)


class SensitivityReport(Base):
    per_step_linf_gap: List[float]
    base_gap_bound: float
    score_gaps: List[float]
    score_gap_bound: float
    violated: bool

    @classmethod
    def from_gaps(
        cls,
        per_step_linf_gap: List[float],
        base_gap_bound: float,
        score_gaps: List[float],
        score_gap_bound: float,
        tolerance: float = GAP_TOLERANCE,
    ) -> "SensitivityReport":
        """violated iff a gap exceeds its bound by more than tolerance.

        Step 1 is checked against base_gap_bound, later steps against the
        step-1 gap, every score gap against score_gap_bound.
        """
        violated = False
        if per_step_linf_gap:
            first = per_step_linf_gap[0]
            violated |= first > base_gap_bound + tolerance
            violated |= any(gap > first + tolerance for gap in per_step_linf_gap[1:])
        violated |= any(gap > score_gap_bound + tolerance for gap in score_gaps)
        return cls(
            per_step_linf_gap=per_step_linf_gap,
            base_gap_bound=base_gap_bound,
            score_gaps=score_gaps,
            score_gap_bound=score_gap_bound,
            violated=violated,
        )


class UtilityRecord(Base):
    n: int
    m: int
    d: int
    seed: int
    pipeline: Pipeline
    excess_risk: Optional[float] = None
    passed: Optional[bool] = None
    status: str = "ok"


class UtilitySummary(Base):
    n: int
    m: int
    d: int
    pipeline: Pipeline
    mean: Optional[float] = None
    stderr: Optional[float] = None
    count: int = 0
    failures: int = 0
    status: str = "ok"


class CheckResult(Base):
    name: str
    trials: int
    violations: int
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.violations == 0


class CertificationReport(Base):
    checks: List[CheckResult] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)
