import json

import numpy as np
import pytest

from userdp.core.harness import make_instance
from userdp.core.optimizer import sgd_trajectory
from userdp.enums import LossKind, Pipeline
from userdp.errors import InvalidArgumentError
from userdp.models import CertificationReport, CheckResult, UtilityRecord, UtilitySummary
from userdp.repositories import (
    CERTIFICATION_SCHEMA,
    TRAJECTORY_SCHEMA,
    UTILITY_RECORD_SCHEMA,
    UTILITY_SCHEMA,
    CsvRepository,
    DatasetRepository,
    certification_rows,
    trajectory_rows,
    utility_record_rows,
    utility_rows,
    vega_lite_descriptor,
    write_vega_lite,
)


@pytest.mark.parametrize("loss", [LossKind.QUADRATIC, LossKind.LINEAR])
def test_dataset_file_reproduces_samples(tmp_path, loss):
    _, dataset = make_instance(loss, 3, 6, 2, seed=4)
    repository = DatasetRepository(tmp_path / "dataset.txt")
    repository.create(dataset)
    loaded = repository.load()
    assert loaded.equals(dataset)
    assert loaded.seed == dataset.seed
    assert loaded.distribution.kind == dataset.distribution.kind
    assert loaded.distribution.truncation_bound == dataset.distribution.truncation_bound
    np.testing.assert_array_equal(loaded.distribution.mean_mu, dataset.distribution.mean_mu)


def test_dataset_file_rejects_foreign_files(tmp_path):
    path = tmp_path / "other.txt"
    path.write_text("hello\n")
    with pytest.raises(InvalidArgumentError):
        DatasetRepository(path).load()


def test_trajectory_csv(tmp_path, quadratic, tight_cfg):
    model, dataset = quadratic
    log = sgd_trajectory(dataset, model, tight_cfg, model.center)
    repository = CsvRepository(tmp_path / "trajectory.csv", TRAJECTORY_SCHEMA)
    repository.create(trajectory_rows(log, linf_gaps=[0.0] * log.steps))

    lines = repository.path.read_text().splitlines()
    assert lines[0] == "# schema=trajectory v1"
    assert lines[1] == "phase,step,score,answer,linf_gap,excess_risk"
    rows = repository.load()
    assert [row["step"] for row in rows] == ["1", "2", "3", "4"]
    assert all(row["answer"] == "" and row["excess_risk"] == "" for row in rows)
    assert float(rows[0]["score"]) == log.scores[0]
    assert not repository.failed()


def test_failure_marker(tmp_path):
    repository = CsvRepository(tmp_path / "utility.csv", UTILITY_SCHEMA)
    summary = UtilitySummary(n=10, m=2, d=1, pipeline=Pipeline.ROBUST, mean=0.5, stderr=0.1, count=3)
    repository.create_failed(utility_rows([summary]), "core.optimizer: boom\nsecond line")
    assert repository.failed()
    assert repository.path.read_text().splitlines()[-1] == "# failed: core.optimizer: boom second line"
    assert repository.load()[0]["pipeline"] == "robust"


def test_unknown_column_rejected(tmp_path):
    repository = CsvRepository(tmp_path / "x.csv", CERTIFICATION_SCHEMA)
    with pytest.raises(InvalidArgumentError):
        repository.create([{"check": "a", "surprise": 1}])


def test_schema_mismatch_on_load(tmp_path):
    path = tmp_path / "x.csv"
    CsvRepository(path, CERTIFICATION_SCHEMA).create([])
    with pytest.raises(InvalidArgumentError):
        CsvRepository(path, UTILITY_SCHEMA).load()


def test_record_and_certification_rows(tmp_path):
    record = UtilityRecord(n=10, m=2, d=1, seed=0, pipeline=Pipeline.NON_PRIVATE, excess_risk=0.25)
    repository = CsvRepository(tmp_path / "records.csv", UTILITY_RECORD_SCHEMA)
    repository.create(utility_record_rows([record]))
    assert repository.load()[0]["pipeline"] == "non-private"

    report = CertificationReport(checks=[CheckResult(name="score-bounds", trials=4, violations=1)])
    rows = certification_rows(report)
    assert rows[0]["passed"] is False


def test_vega_lite_descriptor_skips_failed_points(tmp_path):
    summaries = [
        UtilitySummary(n=100, m=4, d=2, pipeline=Pipeline.ROBUST, mean=0.1, stderr=0.01, count=2),
        UtilitySummary(n=10, m=4, d=2, pipeline=Pipeline.ROBUST, status="infeasible", failures=2),
    ]
    descriptor = vega_lite_descriptor(summaries)
    assert [value["nm"] for value in descriptor["data"]["values"]] == [400]
    path = write_vega_lite(tmp_path / "plot.vl.json", summaries)
    assert json.loads(path.read_text())["mark"]["type"] == "line"


def test_delete(tmp_path):
    repository = CsvRepository(tmp_path / "gone.csv", CERTIFICATION_SCHEMA)
    repository.create([])
    repository.delete()
    assert not repository.path.exists()
    repository.delete()
