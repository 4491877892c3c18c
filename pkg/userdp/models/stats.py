from pydantic import Field

from ..enums import StatisticKind
from .base import Base, Vector


class RobustStatKind(Base):
    variant: StatisticKind = StatisticKind.MEDIAN
    # read only by the trimmed mean
    trim_fraction: float = Field(default=0.25, ge=0, lt=0.5)


class EstimatorConfig(Base):
    threshold_varsigma: float = Field(ge=0)
    kind: RobustStatKind = RobustStatKind()


class GeometricMedianResult(Base):
    point: Vector
    objective: float
    iterations: int
    converged: bool
