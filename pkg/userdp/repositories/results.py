import csv
import json
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from pydantic import BaseModel

from ..errors import InvalidArgumentError
from ..logging_config import logger
from ..models import CertificationReport, TrajectoryLog, UtilityRecord, UtilitySummary
from .base import Repository

Row = Dict[str, Any]


class CsvSchema(BaseModel):
    name: str
    version: int = 1
    columns: List[str]

    @property
    def header(self) -> str:
        return f"# schema={self.name} v{self.version}"


TRAJECTORY_SCHEMA = CsvSchema(
    name="trajectory", columns=["phase", "step", "score", "answer", "linf_gap", "excess_risk"]
)
UTILITY_SCHEMA = CsvSchema(
    name="utility",
    columns=["n", "m", "d", "pipeline", "mean_excess_risk", "stderr", "count", "failures", "status"],
)
UTILITY_RECORD_SCHEMA = CsvSchema(
    name="utility-records",
    columns=["n", "m", "d", "seed", "pipeline", "excess_risk", "passed", "status"],
)
CERTIFICATION_SCHEMA = CsvSchema(
    name="certification", columns=["check", "trials", "violations", "passed", "detail"]
)

FAILURE_MARKER = "# failed"


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


class CsvRepository(Repository[List[Row]]):
    """Versioned CSV table: a schema comment line, the column header, then rows."""

    def __init__(self, path: Path | str, schema: CsvSchema):
        super().__init__(path)
        self.schema = schema

    def create(self, model: List[Row]) -> Path:
        return self._write(model)

    def create_failed(self, rows: List[Row], message: str) -> Path:
        """Flush whatever was produced, then a failure marker row."""
        return self._write(rows, failure=message)

    def _write(self, rows: Sequence[Row], failure: Optional[str] = None) -> Path:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open("w", encoding="utf-8", newline="") as f:
            f.write(self.schema.header + "\n")
            writer = csv.DictWriter(f, fieldnames=self.schema.columns, lineterminator="\n")
            writer.writeheader()
            for row in rows:
                unknown = set(row) - set(self.schema.columns)
                if unknown:
                    raise InvalidArgumentError(f"columns {sorted(unknown)} are not in schema {self.schema.name}")
                writer.writerow({column: _cell(row.get(column)) for column in self.schema.columns})
            if failure is not None:
                f.write(f"{FAILURE_MARKER}: {' '.join(failure.split())}\n")
        logger.info(f"{len(rows)} {self.schema.name} rows written to {self.path}")
        return self.path

    def load(self) -> List[Row]:
        with self.path.open(encoding="utf-8", newline="") as f:
            first = f.readline().rstrip("\n")
            if first != self.schema.header:
                raise InvalidArgumentError(f"{self.path}: expected '{self.schema.header}', found '{first}'")
            lines = [line for line in f if not line.startswith(FAILURE_MARKER)]
        reader = csv.DictReader(lines)
        if reader.fieldnames != self.schema.columns:
            raise InvalidArgumentError(f"{self.path}: columns {reader.fieldnames} do not match {self.schema.columns}")
        return list(reader)

    def failed(self) -> bool:
        with self.path.open(encoding="utf-8") as f:
            return any(line.startswith(FAILURE_MARKER) for line in f)


def trajectory_rows(
    log: TrajectoryLog,
    linf_gaps: Optional[Sequence[float]] = None,
    excess_risks: Optional[Sequence[float]] = None,
) -> List[Row]:
    rows = []
    for step in range(log.steps):
        rows.append(
            {
                "phase": log.phase,
                "step": step + 1,
                "score": log.scores[step],
                "answer": log.answers[step] if step < len(log.answers) else None,
                "linf_gap": linf_gaps[step] if linf_gaps is not None else None,
                "excess_risk": excess_risks[step] if excess_risks is not None else None,
            }
        )
    return rows


def utility_rows(summaries: Sequence[UtilitySummary]) -> List[Row]:
    return [
        {
            "n": s.n,
            "m": s.m,
            "d": s.d,
            "pipeline": s.pipeline,
            "mean_excess_risk": s.mean,
            "stderr": s.stderr,
            "count": s.count,
            "failures": s.failures,
            "status": s.status,
        }
        for s in summaries
    ]


def utility_record_rows(records: Sequence[UtilityRecord]) -> List[Row]:
    return [record.model_dump(mode="json") for record in records]


def certification_rows(report: CertificationReport) -> List[Row]:
    return [
        {
            "check": check.name,
            "trials": check.trials,
            "violations": check.violations,
            "passed": check.passed,
            "detail": check.detail,
        }
        for check in report.checks
    ]


def vega_lite_descriptor(summaries: Sequence[UtilitySummary], title: str = "excess risk vs n*m") -> Dict[str, Any]:
    """Plot-ready Vega-Lite spec with the sweep summaries inlined."""
    values = [row for row in utility_rows(summaries) if row["status"] == "ok"]
    for row in values:
        row["pipeline"] = _cell(row["pipeline"])
        row["nm"] = row["n"] * row["m"]
    return {
        "$schema": "https://vega.github.io/schema/vega-lite/v5.json",
        "title": title,
        "data": {"values": values},
        "mark": {"type": "line", "point": True},
        "encoding": {
            "x": {"field": "nm", "type": "quantitative", "scale": {"type": "log"}, "title": "n * m"},
            "y": {"field": "mean_excess_risk", "type": "quantitative", "scale": {"type": "log"}},
            "color": {"field": "pipeline", "type": "nominal"},
        },
    }


def write_vega_lite(path: Path | str, summaries: Sequence[UtilitySummary]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(vega_lite_descriptor(summaries), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
