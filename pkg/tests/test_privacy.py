import math

import numpy as np
import pytest
from scipy import stats

from userdp.core.privacy import (
    above_threshold_accuracy,
    above_threshold_new,
    above_threshold_query,
    gaussian_mechanism,
    gaussian_sigma,
    laplace_samples,
)
from userdp.enums import Answer
from userdp.errors import InvalidArgumentError, StateViolationError, UnsupportedError
from userdp.models import PrivacyBudget


def test_laplace_matches_distribution(rng):
    draws = laplace_samples(2.0, 50_000, rng)
    assert np.all(np.isfinite(draws))
    assert stats.kstest(draws, "laplace", args=(0, 2.0)).pvalue > 1e-3


def test_laplace_is_reproducible():
    first = laplace_samples(1.0, 10, np.random.default_rng(3))
    second = laplace_samples(1.0, 10, np.random.default_rng(3))
    np.testing.assert_array_equal(first, second)


def test_laplace_scale_must_be_positive(rng):
    with pytest.raises(InvalidArgumentError):
        laplace_samples(0.0, 1, rng)


def test_gaussian_sigma_closed_form():
    sigma = gaussian_sigma(1.0, PrivacyBudget(epsilon=1.0, delta=1e-5))
    assert sigma == pytest.approx(math.sqrt(2 * math.log(1.25e5)))
    assert sigma == pytest.approx(4.844, abs=1e-3)


def test_gaussian_needs_delta(rng):
    with pytest.raises(UnsupportedError):
        gaussian_mechanism(np.zeros(2), 1.0, PrivacyBudget(epsilon=1.0), rng)


def test_zero_sensitivity_returns_input(rng):
    v = np.array([0.1, -2.0, 3.0])
    np.testing.assert_array_equal(gaussian_mechanism(v, 0.0, PrivacyBudget(epsilon=1.0, delta=1e-5), rng), v)


def test_gaussian_mechanism_noise_scale(rng):
    budget = PrivacyBudget(epsilon=2.0, delta=1e-4)
    noisy = gaussian_mechanism(np.zeros(40_000), 0.5, budget, rng)
    sigma = gaussian_sigma(0.5, budget)
    assert stats.kstest(noisy, "norm", args=(0, sigma)).pvalue > 1e-3


def test_debug_above_threshold_answers(rng):
    state = above_threshold_new(10.0, 1.0, rng, insecure_debug=True)
    assert above_threshold_query(state, 11.0, rng) == Answer.TOP
    assert not state.halted
    assert above_threshold_query(state, 9.0, rng) == Answer.BOTTOM
    assert state.halted
    assert state.queries_answered == 2


def test_halted_state_refuses_queries(rng):
    state = above_threshold_new(0.0, 1.0, rng, insecure_debug=True)
    above_threshold_query(state, -1.0, rng)
    with pytest.raises(StateViolationError):
        above_threshold_query(state, 5.0, rng)


def test_noisy_threshold_is_frozen(rng):
    state = above_threshold_new(0.0, 1.0, rng)
    with pytest.raises(ValueError):
        state.noisy_threshold = 1.0


def test_noisy_answers_track_margin(rng):
    # a margin well beyond the accuracy bound is answered correctly
    epsilon = 1.0
    margin = above_threshold_accuracy(2, 1e-3, epsilon)
    for _ in range(200):
        state = above_threshold_new(0.0, epsilon, rng)
        assert above_threshold_query(state, margin, rng) == Answer.TOP
        assert above_threshold_query(state, -margin, rng) == Answer.BOTTOM


def test_budget_split():
    half = PrivacyBudget(epsilon=1.0, delta=1e-6).split(0.5)
    assert half.epsilon == 0.5
    assert half.delta == 1e-6
