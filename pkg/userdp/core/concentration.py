"""Smoothed concentration score and the per-step concentration test."""

from typing import List, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from ..enums import Answer
from ..errors import InvalidArgumentError
from ..logging_config import logger
from ..models import ConcentrationConfig
from .privacy import above_threshold_new, above_threshold_query
from .robust_stats import as_vector_stack

# the score moves by < 2 under a one-user swap; queries are fed at half scale
QUERY_SCALE = 0.5


def _pairwise_linf(gradients) -> np.ndarray:
    stack = as_vector_stack(gradients)
    # lexicographic row order makes the scores bitwise invariant to user order
    stack = stack[np.lexsort(stack.T[::-1])]
    return cdist(stack, stack, metric="chebyshev")


def concentration_score(gradients, tau: float) -> float:
    """(1/B) * sum over ordered pairs (self-pairs included) of exp(-tau * ||g - g'||_inf)."""
    if not tau > 0:
        raise InvalidArgumentError(f"tau must be > 0, got {tau}")
    distances = _pairwise_linf(gradients)
    return float(np.exp(-tau * distances).sum() / distances.shape[0])


def indicator_score(gradients, tau: float) -> float:
    """Non-smoothed comparison score: (1/B) * #{ordered pairs within 1/tau}."""
    if not tau > 0:
        raise InvalidArgumentError(f"tau must be > 0, got {tau}")
    distances = _pairwise_linf(gradients)
    return float((distances <= 1.0 / tau).sum() / distances.shape[0])


def answer_score_stream(
    scores: Sequence[float], cfg: ConcentrationConfig, rng: np.random.Generator
) -> List[Answer]:
    """Feed precomputed scores to one AboveThreshold run, stopping at the first bottom."""
    if len(scores) == 0:
        raise InvalidArgumentError("concentration test needs at least one step")
    state = above_threshold_new(
        cfg.upsilon * QUERY_SCALE,
        cfg.epsilon_share,
        rng,
        insecure_debug=cfg.insecure_debug,
        failure_probability=cfg.failure_probability,
    )
    answers: List[Answer] = []
    for step, score in enumerate(scores, start=1):
        answer = above_threshold_query(state, score * QUERY_SCALE, rng)
        answers.append(answer)
        logger.debug(f"concentration step {step}: score={score:.6g} upsilon={cfg.upsilon:.6g} answer={answer.value}")
        if answer == Answer.BOTTOM:
            break
    return answers


def run_concentration_test(
    per_step_gradients: Sequence, cfg: ConcentrationConfig, rng: np.random.Generator
) -> List[Answer]:
    if len(per_step_gradients) == 0:
        raise InvalidArgumentError("concentration test needs at least one step")
    stacks = [as_vector_stack(step) for step in per_step_gradients]
    if len({stack.shape[0] for stack in stacks}) != 1:
        raise InvalidArgumentError("every step must hold the same number B of gradients")
    scores = [concentration_score(stack, cfg.tau) for stack in stacks]
    return answer_score_stream(scores, cfg, rng)


def all_passed(answers: Sequence[Answer], steps: int) -> bool:
    return len(answers) == steps and all(answer == Answer.TOP for answer in answers)
