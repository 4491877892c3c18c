from .kinds import (
    Alignment,
    Answer,
    DistributionKind,
    LossKind,
    OutputFormat,
    Pipeline,
    StatisticKind,
    Subcommand,
)

__all__ = [
    "Alignment",
    "Answer",
    "DistributionKind",
    "LossKind",
    "OutputFormat",
    "Pipeline",
    "StatisticKind",
    "Subcommand",
]
