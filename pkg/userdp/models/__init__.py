from .base import Base, Matrix, Tensor3, Vector
from .harness import (
    CertificationReport,
    CheckResult,
    NeighborSpec,
    SensitivityReport,
    UtilityRecord,
    UtilitySummary,
)
from .optimizer import ConcentrationConfig, DpSgdConfig, LocalizationResult, TrajectoryLog
from .privacy import AboveThresholdState, PrivacyBudget
from .problem import Dataset, Distribution, LossModel, UserRecord, is_diagonally_dominant
from .run_config import RunConfig
from .stats import EstimatorConfig, GeometricMedianResult, RobustStatKind

__all__ = [
    "AboveThresholdState",
    "Base",
    "CertificationReport",
    "CheckResult",
    "ConcentrationConfig",
    "Dataset",
    "Distribution",
    "DpSgdConfig",
    "EstimatorConfig",
    "GeometricMedianResult",
    "LocalizationResult",
    "LossModel",
    "Matrix",
    "NeighborSpec",
    "PrivacyBudget",
    "RobustStatKind",
    "RunConfig",
    "SensitivityReport",
    "Tensor3",
    "TrajectoryLog",
    "UserRecord",
    "UtilityRecord",
    "UtilitySummary",
    "Vector",
    "is_diagonally_dominant",
]
