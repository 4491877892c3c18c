import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from userdp.core.estimator import project_to_interval, robust_gradient_estimate
from userdp.core.robust_stats import coord_robust_stat
from userdp.enums import StatisticKind
from userdp.errors import InvalidArgumentError
from userdp.models import EstimatorConfig, RobustStatKind


def test_identical_vectors():
    cfg = EstimatorConfig(threshold_varsigma=0.5)
    np.testing.assert_array_equal(robust_gradient_estimate([[1.5, -2.0]] * 4, cfg), [1.5, -2.0])


def test_outlier_mean_is_clamped():
    cfg = EstimatorConfig(threshold_varsigma=1.0)
    np.testing.assert_array_equal(robust_gradient_estimate([0, 0, 0, 0, 1000], cfg), [1.0])


def test_tight_cluster_returns_exact_mean(rng):
    for variant in StatisticKind:
        cfg = EstimatorConfig(threshold_varsigma=0.2, kind=RobustStatKind(variant=variant))
        vectors = np.array([3.0, -1.0, 0.5]) + rng.uniform(-0.05, 0.05, size=(11, 3))
        assert np.array_equal(robust_gradient_estimate(vectors, cfg), vectors.mean(axis=0))


def test_output_within_varsigma_of_statistic(rng):
    cfg = EstimatorConfig(threshold_varsigma=0.3)
    vectors = rng.standard_cauchy(size=(9, 4))
    estimate = robust_gradient_estimate(vectors, cfg)
    assert np.max(np.abs(estimate - coord_robust_stat(vectors))) <= 0.3 + 1e-12


def test_empty_input():
    with pytest.raises(InvalidArgumentError):
        robust_gradient_estimate(np.empty((0, 2)), EstimatorConfig(threshold_varsigma=1.0))


def test_project_to_interval():
    assert project_to_interval(5.0, 0.0, 1.0) == 1.0
    assert project_to_interval(0.25, 0.0, 1.0) == 0.25
    with pytest.raises(InvalidArgumentError):
        project_to_interval(0.0, 0.0, -1.0)


@given(
    st.floats(-100, 100), st.floats(-1, 1), st.floats(-100, 100), st.floats(-1, 1), st.floats(0, 50)
)
def test_projection_stability(value, value_shift, center, center_shift, radius):
    first = project_to_interval(value, center, radius)
    second = project_to_interval(value + value_shift, center + center_shift, radius)
    assert abs(first - second) <= max(abs(value_shift), abs(center_shift)) + 1e-9
