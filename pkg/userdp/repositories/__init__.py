from .base import Repository
from .dataset import DatasetRepository
from .results import (
    CERTIFICATION_SCHEMA,
    TRAJECTORY_SCHEMA,
    UTILITY_RECORD_SCHEMA,
    UTILITY_SCHEMA,
    CsvRepository,
    CsvSchema,
    certification_rows,
    trajectory_rows,
    utility_record_rows,
    utility_rows,
    vega_lite_descriptor,
    write_vega_lite,
)

__all__ = [
    "CERTIFICATION_SCHEMA",
    "TRAJECTORY_SCHEMA",
    "UTILITY_RECORD_SCHEMA",
    "UTILITY_SCHEMA",
    "CsvRepository",
    "CsvSchema",
    "DatasetRepository",
    "Repository",
    "certification_rows",
    "trajectory_rows",
    "utility_record_rows",
    "utility_rows",
    "vega_lite_descriptor",
    "write_vega_lite",
]
