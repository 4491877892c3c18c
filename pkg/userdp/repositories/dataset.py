import io
import json
import re
from pathlib import Path

import numpy as np

from ..errors import InvalidArgumentError
from ..logging_config import logger
from ..models import Dataset, Distribution
from .base import Repository

MAGIC = "# userdp-dataset v1"
_SHAPE = re.compile(r"^# n=(\d+) m=(\d+) d=(\d+) seed=(\S+)$")


class DatasetRepository(Repository[Dataset]):
    """Plain-text dataset file.

    Three comment lines (magic, shape and seed, distribution JSON or null),
    then one row per sample: user index, sample index, d coordinates, all
    floats written with %.17g so a load returns the exact same array.
    """

    def create(self, model: Dataset) -> Path:
        n, m, d = model.samples.shape
        users, samples = np.meshgrid(np.arange(n), np.arange(m), indexing="ij")
        table = np.column_stack([users.ravel(), samples.ravel(), model.samples.reshape(n * m, d)])
        distribution = "null" if model.distribution is None else model.distribution.model_dump_json()
        header = "\n".join(
            [MAGIC[2:], f"n={n} m={m} d={d} seed={model.seed}", f"distribution={distribution}"]
        )

        self.path.parent.mkdir(parents=True, exist_ok=True)
        fmt = ["%d", "%d"] + ["%.17g"] * d
        np.savetxt(self.path, table, fmt=fmt, header=header, comments="# ")
        logger.info(f"dataset n={n} m={m} d={d} written to {self.path}")
        return self.path

    def load(self) -> Dataset:
        text = self.path.read_text(encoding="utf-8")
        lines = text.splitlines()
        if len(lines) < 3 or lines[0] != MAGIC:
            raise InvalidArgumentError(f"{self.path} is not a userdp dataset file")
        shape = _SHAPE.match(lines[1])
        if shape is None or not lines[2].startswith("# distribution="):
            raise InvalidArgumentError(f"{self.path}: malformed dataset header")
        n, m, d = (int(shape.group(i)) for i in (1, 2, 3))
        seed = None if shape.group(4) == "None" else int(shape.group(4))
        payload = json.loads(lines[2][len("# distribution=") :])
        distribution = None if payload is None else Distribution.model_validate(payload)

        table = np.loadtxt(io.StringIO(text), comments="#", ndmin=2)
        if table.shape != (n * m, d + 2):
            raise InvalidArgumentError(f"{self.path}: expected {n * m} rows of {d + 2} columns, got {table.shape}")
        return Dataset(samples=table[:, 2:].reshape(n, m, d), seed=seed, distribution=distribution)
