import numpy as np

from ..errors import InvalidArgumentError
from ..models import EstimatorConfig
from .robust_stats import as_vector_stack, coord_robust_stat


def project_to_interval(value, center, radius):
    """clamp(value, center - radius, center + radius); works elementwise on arrays."""
    if np.any(np.asarray(radius) < 0):
        raise InvalidArgumentError(f"radius must be >= 0, got {radius}")
    return np.clip(value, np.subtract(center, radius), np.add(center, radius))


def robust_gradient_estimate(vectors, cfg: EstimatorConfig) -> np.ndarray:
    """Debiased robust aggregate of B gradient vectors.

    Per coordinate: the mean when it is within varsigma of the robust
    statistic, otherwise the mean projected onto [rs - varsigma, rs + varsigma].
    The output always lies in the l-inf ball of radius varsigma around the
    robust statistic.
    """
    stack = as_vector_stack(vectors)
    robust = coord_robust_stat(stack, cfg.kind)
    mean = stack.mean(axis=0)
    varsigma = cfg.threshold_varsigma

    far = np.abs(robust - mean) >= varsigma
    return np.where(far, project_to_interval(mean, robust, varsigma), mean)
