"""Coordinate-wise robust statistics and the Weiszfeld geometric median.

The coordinate-wise median and trimmed mean are order-statistic based, so
they are 1-Lipschitz under per-point l-inf perturbations, affine equivariant
and contained in any l-inf ball holding enough of the points. The geometric
median has none of the l-inf guarantees and is kept only to demonstrate its
instability.
"""

import math
from typing import Sequence

import numpy as np

from ..enums import StatisticKind
from ..errors import ConvergenceError, InvalidArgumentError
from ..models import GeometricMedianResult, RobustStatKind

ANCHOR_TOLERANCE = 1e-12
ANCHOR_JITTER = 1e-9


def as_vector_stack(vectors) -> np.ndarray:
    stack = np.asarray(vectors, dtype=np.float64)
    if stack.ndim == 1:
        stack = stack[:, None]
    if stack.ndim != 2 or stack.shape[0] == 0:
        raise InvalidArgumentError(f"expected a non-empty list of equal-length vectors, got shape {stack.shape}")
    return stack


def trim_count(batch: int, trim_fraction: float) -> int:
    if not 0 <= trim_fraction < 0.5:
        raise InvalidArgumentError(f"trim_fraction must lie in [0, 0.5), got {trim_fraction}")
    return math.floor(trim_fraction * batch)


def median_1d(values: Sequence[float]) -> float:
    """Lower-middle order statistic (no averaging for even counts)."""
    sorted_values = np.sort(as_vector_stack(values)[:, 0])
    return float(sorted_values[(len(sorted_values) - 1) // 2])


def trimmed_mean_1d(values: Sequence[float], trim_fraction: float) -> float:
    sorted_values = np.sort(as_vector_stack(values)[:, 0])
    k = trim_count(len(sorted_values), trim_fraction)
    return float(sorted_values[k : len(sorted_values) - k].mean())


def coord_robust_stat(vectors, kind: RobustStatKind = RobustStatKind()) -> np.ndarray:
    """Coordinate j of the output is the 1-d statistic of {X_i[j]}."""
    stack = np.sort(as_vector_stack(vectors), axis=0)
    batch = stack.shape[0]
    if kind.variant == StatisticKind.MEDIAN:
        return stack[(batch - 1) // 2].copy()
    k = trim_count(batch, kind.trim_fraction)
    return stack[k : batch - k].mean(axis=0)


def _weiszfeld_objective(point: np.ndarray, points: np.ndarray, weights: np.ndarray) -> float:
    return float(np.sum(weights * np.linalg.norm(points - point, axis=1)))


def _optimal_anchor(points: np.ndarray, weights: np.ndarray):
    """Return an input point satisfying the subgradient optimality condition, if any.

    x_k is the geometric median iff || sum_{j != k} w_j (x_j - x_k) / ||x_j - x_k|| || <= w_k.
    Plain Weiszfeld only approaches such a vertex sublinearly.
    """
    for k, anchor in enumerate(points):
        offsets = np.delete(points, k, axis=0) - anchor
        if offsets.shape[0] == 0:
            return anchor
        distances = np.linalg.norm(offsets, axis=1)
        pull = (np.delete(weights, k)[:, None] * offsets / distances[:, None]).sum(axis=0)
        if np.linalg.norm(pull) <= weights[k]:
            return anchor
    return None


def geometric_median_weiszfeld(points, tol: float = 1e-10, max_iter: int = 10_000) -> GeometricMedianResult:
    """argmin_x sum_p ||x - p||_2 via Weiszfeld with an anchor safeguard.

    Coincident input points are merged into weights; an input point that is
    already optimal is returned directly; an iterate landing on an input point
    is nudged by ANCHOR_JITTER along the first axis.
    """
    points = as_vector_stack(points)
    if tol <= 0:
        raise InvalidArgumentError(f"tol must be > 0, got {tol}")

    distinct, counts = np.unique(points, axis=0, return_counts=True)
    weights = counts.astype(np.float64)

    anchor = _optimal_anchor(distinct, weights)
    if anchor is not None:
        return GeometricMedianResult(
            point=anchor,
            objective=_weiszfeld_objective(anchor, distinct, weights),
            iterations=0,
            converged=True,
        )

    current = (weights[:, None] * distinct).sum(axis=0) / weights.sum()
    best = current
    best_objective = _weiszfeld_objective(current, distinct, weights)
    jitter = np.zeros_like(current)
    jitter[0] = ANCHOR_JITTER

    for iteration in range(1, max_iter + 1):
        distances = np.linalg.norm(distinct - current, axis=1)
        if np.any(distances < ANCHOR_TOLERANCE):
            current = current + jitter
            distances = np.linalg.norm(distinct - current, axis=1)

        inverse = weights / distances
        updated = (inverse[:, None] * distinct).sum(axis=0) / inverse.sum()
        step = float(np.linalg.norm(updated - current))
        current = updated

        objective = _weiszfeld_objective(current, distinct, weights)
        if objective <= best_objective:
            best, best_objective = current, objective
        if step < tol:
            return GeometricMedianResult(
                point=best, objective=best_objective, iterations=iteration, converged=True
            )

    raise ConvergenceError(
        f"Weiszfeld did not converge within {max_iter} iterations",
        result=GeometricMedianResult(
            point=best, objective=best_objective, iterations=max_iter, converged=False
        ),
    )
