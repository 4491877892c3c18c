from enum import Enum


class LossKind(str, Enum):
    QUADRATIC = "quadratic-diag-dominant"
    LINEAR = "linear"


class DistributionKind(str, Enum):
    GAUSSIAN_MEAN = "gaussian-mean"
    LINEAR_HARD_INSTANCE = "linear-hard-instance"


class StatisticKind(str, Enum):
    MEDIAN = "coordinate-median"
    TRIMMED_MEAN = "coordinate-trimmed-mean"


class Answer(str, Enum):
    TOP = "top"
    BOTTOM = "bottom"


class Alignment(str, Enum):
    ALIGNED = "aligned"
    ADVERSARIAL_SCATTER = "adversarial-scatter"
    UNCONSTRAINED = "unconstrained"


class Pipeline(str, Enum):
    ROBUST = "robust"
    NAIVE_BASELINE = "naive-baseline"
    NON_PRIVATE = "non-private"


class Subcommand(str, Enum):
    RUN = "run"
    SENSITIVITY = "sensitivity"
    SWEEP = "sweep"
    COUNTEREXAMPLE = "counterexample"
    CERTIFY = "certify"


class OutputFormat(str, Enum):
    CSV = "csv"
    JSON = "json"
