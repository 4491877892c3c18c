import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from userdp.core.concentration import (
    all_passed,
    answer_score_stream,
    concentration_score,
    indicator_score,
    run_concentration_test,
)
from userdp.enums import Answer
from userdp.errors import InvalidArgumentError
from userdp.models import ConcentrationConfig


def _debug_cfg(upsilon, tau=1.0):
    return ConcentrationConfig(tau=tau, upsilon=upsilon, epsilon_share=0.5, insecure_debug=True)


def test_identical_gradients_score_batch():
    assert concentration_score(np.ones((7, 3)), tau=2.0) == pytest.approx(7.0)


def test_far_apart_gradients_score_one():
    gradients = np.arange(5, dtype=float)[:, None] * 1e6
    assert concentration_score(gradients, tau=1.0) == pytest.approx(1.0)


def test_two_points_hand_evaluated():
    assert concentration_score([[0.0, 0.0], [1.0, 0.5]], tau=1.0) == pytest.approx(1 + math.exp(-1))


@given(
    st.integers(1, 12).flatmap(lambda b: arrays(np.float64, (b, 3), elements=st.floats(-50, 50))),
    st.floats(0.01, 10),
)
def test_score_bounds(gradients, tau):
    score = concentration_score(gradients, tau)
    assert 1.0 - 1e-9 <= score <= gradients.shape[0] + 1e-9


def test_indicator_score_counts_pairs():
    gradients = [[0.0], [0.5], [3.0]]
    # ordered pairs within 1: three self-pairs plus (0, 0.5) both ways
    assert indicator_score(gradients, tau=1.0) == pytest.approx(5 / 3)


def test_tau_must_be_positive():
    with pytest.raises(InvalidArgumentError):
        concentration_score([[0.0]], tau=0.0)


def test_clustered_steps_all_pass(rng):
    steps = [np.zeros((10, 2)) + 1e-4 * rng.normal(size=(10, 2)) for _ in range(4)]
    answers = run_concentration_test(steps, _debug_cfg(upsilon=9.0), rng)
    assert answers == [Answer.TOP] * 4
    assert all_passed(answers, 4)


def test_scattered_first_step_halts(rng):
    scattered = np.arange(10, dtype=float)[:, None] * 100.0
    steps = [scattered, np.zeros((10, 1)), np.zeros((10, 1))]
    answers = run_concentration_test(steps, _debug_cfg(upsilon=9.0), rng)
    assert answers == [Answer.BOTTOM]
    assert not all_passed(answers, 3)


def test_stream_stops_at_first_bottom(rng):
    answers = answer_score_stream([10.0, 10.0, 1.0, 10.0], _debug_cfg(upsilon=5.0), rng)
    assert answers == [Answer.TOP, Answer.TOP, Answer.BOTTOM]


def test_steps_need_equal_batches(rng):
    with pytest.raises(InvalidArgumentError):
        run_concentration_test([np.zeros((3, 1)), np.zeros((4, 1))], _debug_cfg(upsilon=1.0), rng)


def test_empty_test(rng):
    with pytest.raises(InvalidArgumentError):
        run_concentration_test([], _debug_cfg(upsilon=1.0), rng)


batches = st.integers(1, 12).flatmap(lambda b: arrays(np.float64, (b, 3), elements=st.floats(-50, 50)))


@given(batches, st.floats(0.01, 10), st.integers(0, 2**16))
def test_user_order_does_not_change_scores(gradients, tau, seed):
    order = np.random.default_rng(seed).permutation(gradients.shape[0])
    assert concentration_score(gradients[order], tau) == concentration_score(gradients, tau)
    assert indicator_score(gradients[order], tau) == indicator_score(gradients, tau)


@given(batches, st.floats(0.01, 10), st.floats(0.01, 10))
def test_score_non_increasing_in_tau(gradients, first, second):
    low, high = sorted((first, second))
    assert concentration_score(gradients, high) <= concentration_score(gradients, low) + 1e-12


def test_score_of_shuffled_batch_is_bitwise_equal(rng):
    gradients = rng.normal(size=(200, 4))
    shuffled = gradients[rng.permutation(200)]
    assert concentration_score(shuffled, 3.0) == concentration_score(gradients, 3.0)
