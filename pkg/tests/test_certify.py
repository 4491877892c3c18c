import numpy as np
import pytest

from userdp.core.certify import (
    SUITE,
    check_above_threshold,
    check_affine,
    check_concentration_test,
    check_containment,
    check_contractivity,
    check_estimator,
    check_geometric_median,
    check_iteration_sensitivity,
    check_lipschitz,
    check_projection,
    check_score_bounds,
    run_certification,
)


@pytest.mark.parametrize(
    "check, trials",
    [
        (check_containment, 300),
        (check_lipschitz, 300),
        (check_affine, 300),
        (check_projection, 5_000),
        (check_estimator, 300),
        (check_contractivity, 100),
        (check_score_bounds, 200),
        (check_above_threshold, 200),
        (check_geometric_median, 1),
        (check_iteration_sensitivity, 5),
    ],
)
def test_exact_checks_hold(check, trials):
    results = check(np.random.default_rng(99), trials)
    failed = [(r.name, r.violations, r.detail) for r in results if not r.passed]
    assert failed == []


def test_certification_report_covers_suite():
    report = run_certification(scale=0.001, seed=3)
    names = {check.name for check in report.checks}
    assert {"containment[coordinate-median]", "concentration-halt", "gaussian-calibration"} <= names
    assert all(check.trials >= 1 for check in report.checks)
    assert len(SUITE) == 12


def test_certification_is_seeded():
    first = run_certification(scale=0.001, seed=11)
    second = run_certification(scale=0.001, seed=11)
    assert [(c.name, c.violations) for c in first.checks] == [(c.name, c.violations) for c in second.checks]


def test_concentration_check_at_default_parameters():
    results = check_concentration_test(np.random.default_rng(5), 20)
    assert [(r.name, r.violations) for r in results] == [("concentration-pass", 0), ("concentration-halt", 0)]
    assert all(r.detail.startswith("frequency 1.000") for r in results)
