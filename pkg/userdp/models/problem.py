import math
from typing import List, Optional, Sequence

import numpy as np
from pydantic import Field, model_validator

from ..enums import DistributionKind, LossKind
from ..errors import InvalidArgumentError
from .base import Base, Matrix, Tensor3, Vector


class UserRecord(Base):
    """The m samples contributed by one user, shape (m, d)."""

    samples: Matrix

    @model_validator(mode="after")
    def _at_least_one_sample(self) -> "UserRecord":
        if self.samples.shape[0] < 1 or self.samples.shape[1] < 1:
            raise ValueError(f"a user needs m >= 1 samples of d >= 1 coordinates, got {self.samples.shape}")
        return self

    @property
    def m(self) -> int:
        return self.samples.shape[0]

    @property
    def d(self) -> int:
        return self.samples.shape[1]


class Distribution(Base):
    kind: DistributionKind
    mean_mu: Vector
    per_coordinate_std: float = Field(ge=0)
    # inf disables truncation
    truncation_bound: float = Field(default=math.inf, gt=0)

    @model_validator(mode="after")
    def _mean_in_unit_cube(self) -> "Distribution":
        if self.kind == DistributionKind.LINEAR_HARD_INSTANCE and np.max(np.abs(self.mean_mu)) > 1:
            raise ValueError("hard-instance mean must satisfy ||mu||_inf <= 1")
        return self

    @property
    def d(self) -> int:
        return self.mean_mu.shape[0]

    def descriptor(self) -> str:
        return self.model_dump_json()


class Dataset(Base):
    """n users x m samples x d coordinates, stored as one (n, m, d) array."""

    samples: Tensor3
    seed: Optional[int] = None
    distribution: Optional[Distribution] = None

    @model_validator(mode="after")
    def _non_empty(self) -> "Dataset":
        if min(self.samples.shape) < 1:
            raise ValueError(f"dataset needs n, m, d >= 1, got shape {self.samples.shape}")
        return self

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def m(self) -> int:
        return self.samples.shape[1]

    @property
    def d(self) -> int:
        return self.samples.shape[2]

    @property
    def users(self) -> List[UserRecord]:
        return [self.user(i) for i in range(self.n)]

    def user(self, index: int) -> UserRecord:
        return UserRecord(samples=self.samples[index])

    def take(self, indices: Sequence[int]) -> "Dataset":
        return Dataset(
            samples=self.samples[np.asarray(indices, dtype=int)],
            seed=self.seed,
            distribution=self.distribution,
        )

    def with_user(self, index: int, user: UserRecord) -> "Dataset":
        if not 0 <= index < self.n:
            raise InvalidArgumentError(f"user index {index} out of range for n={self.n}")
        if user.samples.shape != self.samples.shape[1:]:
            raise InvalidArgumentError(
                f"replacement shape {user.samples.shape} does not match (m, d) = {self.samples.shape[1:]}"
            )
        samples = self.samples.copy()
        samples[index] = user.samples
        return Dataset(samples=samples, seed=self.seed, distribution=self.distribution)

    def equals(self, other: "Dataset") -> bool:
        return np.array_equal(self.samples, other.samples)


class LossModel(Base):
    """Per-sample convex loss f(x; z) over the l-inf ball of radius D around center.

    quadratic: f(x; z) = 1/2 (x - z)^T A (x - z) with one diagonally dominant A
    linear:    f(x; z) = -<x, z>
    """

    kind: LossKind
    lipschitz_G: float = Field(ge=0)
    smooth_beta: float = Field(ge=0)
    radius_D: float = Field(ge=0)
    center: Vector
    optimum: Vector
    hessian: Optional[Matrix] = None
    population_mean: Optional[Vector] = None

    @model_validator(mode="after")
    def _consistent(self) -> "LossModel":
        d = self.center.shape[0]
        if self.optimum.shape[0] != d:
            raise ValueError("optimum and center dimensions differ")
        if self.population_mean is not None and self.population_mean.shape[0] != d:
            raise ValueError("population mean and center dimensions differ")
        if self.kind == LossKind.QUADRATIC:
            if self.hessian is None or self.hessian.shape != (d, d):
                raise ValueError(f"quadratic loss needs a {d}x{d} hessian")
            if not np.array_equal(self.hessian, self.hessian.T):
                raise ValueError("hessian must be symmetric")
            if not is_diagonally_dominant(self.hessian):
                raise ValueError("hessian must be diagonally dominant")
        elif self.smooth_beta != 0:
            raise ValueError("linear loss has smoothness 0")
        return self

    @property
    def d(self) -> int:
        return self.center.shape[0]

    def gradients(self, x: np.ndarray, samples: np.ndarray) -> np.ndarray:
        """Per-sample gradients at x for samples of shape (..., d)."""
        if self.kind == LossKind.LINEAR:
            return -np.asarray(samples, dtype=np.float64)
        return (x - samples) @ self.hessian

    def losses(self, x: np.ndarray, samples: np.ndarray) -> np.ndarray:
        if self.kind == LossKind.LINEAR:
            return -(np.asarray(samples, dtype=np.float64) @ x)
        diff = x - samples
        return 0.5 * np.einsum("...i,ij,...j->...", diff, self.hessian, diff)


def is_diagonally_dominant(matrix: np.ndarray) -> bool:
    """|A_ii| >= sum_{j != i} |A_ij| for every row, no tolerance."""
    magnitudes = np.abs(matrix)
    diagonal = np.diag(magnitudes)
    off_diagonal = np.where(np.eye(matrix.shape[0], dtype=bool), 0.0, magnitudes).sum(axis=1)
    return bool(np.all(diagonal >= off_diagonal))
