"""Noise primitives and the two mechanisms the pipeline composes.

Floating-point Laplace and Gaussian samplers here are not hardened against
precision attacks; they are research samplers.
"""

import math
from typing import Optional

import numpy as np

from ..enums import Answer
from ..errors import InvalidArgumentError, StateViolationError, UnsupportedError
from ..logging_config import logger
from ..models import AboveThresholdState, PrivacyBudget

# smallest positive uniform draw; u = 0 would map to -inf
_TINY = np.finfo(np.float64).tiny


def laplace_samples(scale: float, size, rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF Laplace(0, scale) draws, one uniform per sample."""
    if not scale > 0:
        raise InvalidArgumentError(f"Laplace scale must be > 0, got {scale}")
    uniform = rng.random(size)
    uniform = np.where(uniform == 0.0, _TINY, uniform) - 0.5
    return -scale * np.sign(uniform) * np.log1p(-2.0 * np.abs(uniform))


def laplace_sample(scale: float, rng: np.random.Generator) -> float:
    return float(laplace_samples(scale, 1, rng)[0])


def gaussian_sigma(l2_sensitivity: float, budget: PrivacyBudget) -> float:
    """sigma = Delta * sqrt(2 ln(1.25 / delta)) / epsilon, with equality."""
    if budget.delta <= 0:
        raise UnsupportedError("the Gaussian mechanism requires delta > 0")
    if l2_sensitivity < 0:
        raise InvalidArgumentError(f"l2_sensitivity must be >= 0, got {l2_sensitivity}")
    return l2_sensitivity * math.sqrt(2.0 * math.log(1.25 / budget.delta)) / budget.epsilon


def gaussian_noise(sigma: float, d: int, rng: np.random.Generator) -> np.ndarray:
    if sigma == 0:
        return np.zeros(d)
    return rng.normal(0.0, sigma, size=d)


def gaussian_mechanism(
    v: np.ndarray, l2_sensitivity: float, budget: PrivacyBudget, rng: np.random.Generator
) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    sigma = gaussian_sigma(l2_sensitivity, budget)
    return v + gaussian_noise(sigma, v.size, rng).reshape(v.shape)


def above_threshold_new(
    threshold: float,
    epsilon: float,
    rng: np.random.Generator,
    insecure_debug: bool = False,
    failure_probability: Optional[float] = None,
) -> AboveThresholdState:
    """Start an AboveThreshold run: noisy threshold = threshold - Lap(2/epsilon).

    ``failure_probability`` is only recorded; the mechanism is (epsilon, 0)-DP.
    """
    if not epsilon > 0:
        raise InvalidArgumentError(f"epsilon must be > 0, got {epsilon}")
    if insecure_debug:
        logger.warning("insecure_debug: AboveThreshold noise suppressed, output is NOT private")
        noisy = float(threshold)
    else:
        noisy = float(threshold) - laplace_sample(2.0 / epsilon, rng)
    return AboveThresholdState(
        threshold=threshold,
        noisy_threshold=noisy,
        epsilon=epsilon,
        noise_free=insecure_debug,
        failure_probability=failure_probability,
    )


def above_threshold_query(state: AboveThresholdState, q_value: float, rng: np.random.Generator) -> Answer:
    if state.halted:
        raise StateViolationError(
            f"AboveThreshold already halted after {state.queries_answered} queries"
        )
    noise = 0.0 if state.noise_free else laplace_sample(4.0 / state.epsilon, rng)
    state.queries_answered += 1
    if q_value + noise < state.noisy_threshold:
        state.halted = True
        return Answer.BOTTOM
    return Answer.TOP


def above_threshold_accuracy(queries: int, gamma: float, epsilon: float) -> float:
    """alpha such that every answer is correct up to alpha w.p. >= 1 - gamma over `queries` queries."""
    if queries < 1 or not 0 < gamma < 1 or not epsilon > 0:
        raise InvalidArgumentError("need queries >= 1, 0 < gamma < 1, epsilon > 0")
    return 8.0 * math.log(2.0 * queries / gamma) / epsilon
