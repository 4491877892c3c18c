"""Randomized certification suite.

Each check returns a CheckResult counting violations of an exact bound (plus
additive tolerance) over a fixed number of seeded trials. Statistical checks
(pass / halt frequencies, goodness of fit) count a violation only when the
observed frequency or p-value misses its target.
"""

import math
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy import stats

from ..enums import Alignment, Answer, StatisticKind
from ..errors import StateViolationError
from ..logging_config import logger, settings
from ..models import (
    CertificationReport,
    CheckResult,
    DpSgdConfig,
    EstimatorConfig,
    NeighborSpec,
    PrivacyBudget,
    RobustStatKind,
)
from .concentration import concentration_score
from .estimator import project_to_interval, robust_gradient_estimate
from .harness import (
    coordinate_median_shift,
    counterexample_geometric_median,
    halted_at_first_step,
    measure_iteration_sensitivity,
    neighboring_pair,
    trial_seeds,
)
from .optimizer import default_params, dpsgd_phase, threshold_upsilon
from .privacy import (
    above_threshold_new,
    above_threshold_query,
    gaussian_mechanism,
    gaussian_sigma,
    laplace_samples,
)
from .problem import diagonally_dominant_hessian, make_quadratic_instance
from .robust_stats import coord_robust_stat, trim_count

LIPSCHITZ_TOLERANCE = 1e-12
AFFINE_TOLERANCE = 1e-9
BOUND_TOLERANCE = 1e-9
KS_SIGNIFICANCE = 0.01
TARGET_FREQUENCY = 0.95

STATISTICS = (
    RobustStatKind(variant=StatisticKind.MEDIAN),
    RobustStatKind(variant=StatisticKind.TRIMMED_MEAN, trim_fraction=0.25),
)

# desk-scale instance for the trajectory checks: tight clusters relative to 1/tau
CHECK_DIMENSION = 2
CHECK_USERS_PER_STEP = 30
CHECK_STEPS = 4
CHECK_SAMPLES = 8
CHECK_NOISE_STD = 0.005
CHECK_TAU = 10.0

# concentration frequency checks: default parameters, one step of B users
TEST_USERS = 2500
TEST_SAMPLES = 4


def _random_batch(rng: np.random.Generator):
    batch = int(rng.integers(1, 22))
    d = int(rng.integers(1, 9))
    return batch, d


def check_containment(rng: np.random.Generator, trials: int) -> List[CheckResult]:
    """More than the break point inside an l-inf ball puts the statistic in the ball."""
    results = []
    for kind in STATISTICS:
        violations = 0
        for _ in range(trials):
            batch, d = _random_batch(rng)
            if kind.variant == StatisticKind.MEDIAN:
                outside = (batch - 1) // 2
            else:
                outside = trim_count(batch, kind.trim_fraction)
            center = rng.uniform(-5, 5, size=d)
            radius = rng.uniform(0.01, 2)
            inside = center + rng.uniform(-radius, radius, size=(batch - outside, d))
            far = center + np.sign(rng.uniform(-1, 1, size=(outside, d))) * (radius + rng.exponential(10, size=(outside, d)))
            points = rng.permutation(np.vstack([inside, far]))
            stat = coord_robust_stat(points, kind)
            if np.max(np.abs(stat - center)) > radius + LIPSCHITZ_TOLERANCE:
                violations += 1
        results.append(CheckResult(name=f"containment[{kind.variant.value}]", trials=trials, violations=violations))
    return results


def check_lipschitz(rng: np.random.Generator, trials: int) -> List[CheckResult]:
    results = []
    for kind in STATISTICS:
        violations = 0
        for _ in range(trials):
            batch, d = _random_batch(rng)
            points = rng.normal(0, 3, size=(batch, d))
            shift = rng.uniform(-1, 1, size=(batch, d)) * rng.uniform(0, 0.5)
            moved = np.max(np.abs(coord_robust_stat(points, kind) - coord_robust_stat(points + shift, kind)))
            if moved > np.max(np.abs(shift)) + LIPSCHITZ_TOLERANCE:
                violations += 1
        results.append(CheckResult(name=f"lipschitz[{kind.variant.value}]", trials=trials, violations=violations))
    return results


def check_affine(rng: np.random.Generator, trials: int) -> List[CheckResult]:
    """stat(aX + b) = a stat(X) + b; negative a only for odd B with the lower-middle median."""
    results = []
    for kind in STATISTICS:
        violations = 0
        for _ in range(trials):
            batch, d = _random_batch(rng)
            points = rng.normal(0, 3, size=(batch, d))
            scale = rng.uniform(-3, 3)
            if kind.variant == StatisticKind.MEDIAN and batch % 2 == 0:
                scale = abs(scale)
            offset = rng.uniform(-5, 5, size=d)
            expected = scale * coord_robust_stat(points, kind) + offset
            actual = coord_robust_stat(scale * points + offset, kind)
            magnitude = 1.0 + abs(scale) * np.max(np.abs(points)) + np.max(np.abs(offset))
            if np.max(np.abs(actual - expected)) > AFFINE_TOLERANCE * magnitude:
                violations += 1
        results.append(CheckResult(name=f"affine[{kind.variant.value}]", trials=trials, violations=violations))
    return results


def check_projection(rng: np.random.Generator, trials: int) -> List[CheckResult]:
    centers = rng.uniform(-5, 5, size=trials)
    other_centers = centers + rng.uniform(-1, 1, size=trials)
    values = rng.uniform(-10, 10, size=trials)
    other_values = values + rng.uniform(-1, 1, size=trials)
    radius = rng.exponential(1.0, size=trials)
    gap = np.abs(
        project_to_interval(values, centers, radius) - project_to_interval(other_values, other_centers, radius)
    )
    violations = int(np.sum(gap > 1.0 + LIPSCHITZ_TOLERANCE))
    return [CheckResult(name="projection-stability", trials=trials, violations=violations)]


def check_estimator(rng: np.random.Generator, trials: int) -> List[CheckResult]:
    results = []
    for kind in STATISTICS:
        lipschitz = unbiased = 0
        for _ in range(trials):
            batch, d = _random_batch(rng)
            cfg = EstimatorConfig(threshold_varsigma=rng.uniform(0, 2), kind=kind)
            points = rng.normal(0, 2, size=(batch, d))
            shift = rng.uniform(-1, 1, size=(batch, d)) * rng.uniform(0, 0.5)
            moved = np.max(np.abs(robust_gradient_estimate(points, cfg) - robust_gradient_estimate(points + shift, cfg)))
            if moved > np.max(np.abs(shift)) + LIPSCHITZ_TOLERANCE:
                lipschitz += 1

            # points within varsigma / 4 of one center keep every coordinate in the pass-through branch
            tight = rng.uniform(-1, 1, size=d) + rng.uniform(-1, 1, size=(batch, d)) * cfg.threshold_varsigma / 4
            if not np.array_equal(robust_gradient_estimate(tight, cfg), tight.mean(axis=0)):
                unbiased += 1
        results.append(CheckResult(name=f"estimator-lipschitz[{kind.variant.value}]", trials=trials, violations=lipschitz))
        results.append(CheckResult(name=f"estimator-unbiased[{kind.variant.value}]", trials=trials, violations=unbiased))
    return results


def check_contractivity(rng: np.random.Generator, trials: int) -> List[CheckResult]:
    """x -> x - eta (x - z) A is l-inf non-expansive for diagonally dominant A and eta <= 2/beta."""
    violations = 0
    for _ in range(trials):
        d = int(rng.integers(1, 17))
        beta = rng.uniform(0.1, 10)
        hessian = diagonally_dominant_hessian(d, beta, rng)
        eta = rng.uniform(0, 2 / beta)
        x, y, z = rng.uniform(-1, 1, size=(3, d))
        step_x = x - eta * (x - z) @ hessian
        step_y = y - eta * (y - z) @ hessian
        if np.max(np.abs(step_x - step_y)) > np.max(np.abs(x - y)) + BOUND_TOLERANCE:
            violations += 1
    return [CheckResult(name="contractivity", trials=trials, violations=violations)]


def _check_config(budget: PrivacyBudget) -> DpSgdConfig:
    return DpSgdConfig(
        budget=budget,
        eta=1.0,
        tau=CHECK_TAU,
        varsigma=1.0 / CHECK_TAU,
        upsilon=threshold_upsilon(CHECK_USERS_PER_STEP, CHECK_STEPS, budget),
        batch_users_B=CHECK_USERS_PER_STEP,
    )


def check_iteration_sensitivity(rng: np.random.Generator, trials: int) -> List[CheckResult]:
    """Coupled noiseless trajectories on aligned and on unconstrained neighboring pairs."""
    budget = PrivacyBudget(epsilon=1.0, delta=1e-6)
    cfg = _check_config(budget)
    n = CHECK_USERS_PER_STEP * CHECK_STEPS
    aligned = scores = 0
    worst_score_gap = 0.0
    for seed in trial_seeds(int(rng.integers(2**32)), trials):
        model, dataset = make_quadratic_instance(
            CHECK_DIMENSION, n, CHECK_SAMPLES, seed, beta_target=1.0, noise_std=CHECK_NOISE_STD
        )
        swap = seed % CHECK_USERS_PER_STEP
        trial_rng = np.random.default_rng(seed)

        pair = neighboring_pair(
            dataset, NeighborSpec(swap_user_index=swap, alignment=Alignment.ALIGNED), trial_rng, model=model, cfg=cfg
        )
        if measure_iteration_sensitivity(model, pair, cfg).violated:
            aligned += 1

        pair = neighboring_pair(dataset, NeighborSpec(swap_user_index=swap), trial_rng)
        report = measure_iteration_sensitivity(model, pair, cfg)
        worst_score_gap = max([worst_score_gap] + report.score_gaps)
        if any(gap > report.score_gap_bound + BOUND_TOLERANCE for gap in report.score_gaps):
            scores += 1
    return [
        CheckResult(name="iteration-sensitivity", trials=trials, violations=aligned),
        CheckResult(
            name="score-sensitivity",
            trials=trials,
            violations=scores,
            detail=f"largest score gap {worst_score_gap:.6g}",
        ),
    ]


def _frequency_result(name: str, hits: int, trials: int) -> CheckResult:
    frequency = hits / trials
    return CheckResult(
        name=name,
        trials=trials,
        violations=0 if frequency >= TARGET_FREQUENCY else trials - hits,
        detail=f"frequency {frequency:.3f} (target {TARGET_FREQUENCY})",
    )


def check_concentration_test(rng: np.random.Generator, trials: int) -> List[CheckResult]:
    """Default parameters: i.i.d. users pass, adversarially scattered users halt at the first step."""
    budget = PrivacyBudget(epsilon=1.0, delta=1e-6)
    passes = halts = 0
    for seed in trial_seeds(int(rng.integers(2**32)), trials):
        model, dataset = make_quadratic_instance(CHECK_DIMENSION, TEST_USERS, TEST_SAMPLES, seed, beta_target=1.0)
        cfg = default_params(
            dataset.n, dataset.m, dataset.d, budget, model.lipschitz_G, model.radius_D, model.smooth_beta
        )
        trial_rng = np.random.default_rng(seed)
        _, log = dpsgd_phase(dataset, model, cfg, model.center, trial_rng)
        passes += log.passed

        spec = NeighborSpec(swap_user_index=0, alignment=Alignment.ADVERSARIAL_SCATTER)
        _, scattered = neighboring_pair(dataset, spec, trial_rng, model=model, cfg=cfg)
        _, log = dpsgd_phase(scattered, model, cfg, model.center, trial_rng)
        halts += halted_at_first_step(log.answers)
    return [
        _frequency_result("concentration-pass", passes, trials),
        _frequency_result("concentration-halt", halts, trials),
    ]


def check_score_bounds(rng: np.random.Generator, trials: int) -> List[CheckResult]:
    violations = 0
    for _ in range(trials):
        batch, d = _random_batch(rng)
        score = concentration_score(rng.normal(0, 1, size=(batch, d)), rng.uniform(0.01, 10))
        if not 1.0 - BOUND_TOLERANCE <= score <= batch + BOUND_TOLERANCE:
            violations += 1
    return [CheckResult(name="score-bounds", trials=trials, violations=violations)]


def check_mechanisms(rng: np.random.Generator, trials: int) -> List[CheckResult]:
    calibration = 0
    for _ in range(trials):
        sensitivity = rng.uniform(0.01, 10)
        budget = PrivacyBudget(epsilon=rng.uniform(0.01, 5), delta=10 ** rng.uniform(-12, -1))
        ratio = gaussian_sigma(sensitivity, budget) * budget.epsilon / (
            sensitivity * math.sqrt(2 * math.log(1.25 / budget.delta))
        )
        if abs(ratio - 1.0) > LIPSCHITZ_TOLERANCE:
            calibration += 1

    draws = 100_000
    laplace_p = stats.kstest(laplace_samples(1.5, draws, rng), "laplace", args=(0, 1.5)).pvalue
    budget = PrivacyBudget(epsilon=1.0, delta=1e-5)
    sigma = gaussian_sigma(1.0, budget)
    gaussian_p = stats.kstest(gaussian_mechanism(np.zeros(draws), 1.0, budget, rng), "norm", args=(0, sigma)).pvalue
    return [
        CheckResult(name="gaussian-calibration", trials=trials, violations=calibration),
        CheckResult(
            name="laplace-goodness-of-fit", trials=1, violations=int(laplace_p < KS_SIGNIFICANCE), detail=f"p={laplace_p:.4g}"
        ),
        CheckResult(
            name="gaussian-goodness-of-fit", trials=1, violations=int(gaussian_p < KS_SIGNIFICANCE), detail=f"p={gaussian_p:.4g}"
        ),
    ]


def check_above_threshold(rng: np.random.Generator, trials: int) -> List[CheckResult]:
    """Answer sequences are TOP^k BOTTOM or all TOP, and a halted run refuses queries."""
    violations = 0
    for _ in range(trials):
        state = above_threshold_new(0.0, rng.uniform(0.1, 2), rng)
        answers = []
        for _ in range(20):
            answers.append(above_threshold_query(state, rng.normal(0, 5), rng))
            if state.halted:
                break
        well_formed = all(a == Answer.TOP for a in answers[:-1]) and (
            answers[-1] == Answer.BOTTOM if state.halted else answers[-1] == Answer.TOP
        )
        if state.halted:
            try:
                above_threshold_query(state, 0.0, rng)
                well_formed = False
            except StateViolationError:
                pass
        violations += not well_formed
    return [CheckResult(name="above-threshold-halting", trials=trials, violations=violations)]


def check_geometric_median(rng: np.random.Generator, trials: int) -> List[CheckResult]:
    violations = 0
    details = []
    for alpha in (1e-1, 1e-3, 1e-6):
        _, _, distance = counterexample_geometric_median(alpha)
        shift = coordinate_median_shift(alpha)
        details.append(f"alpha={alpha:g}: geometric {distance:.4f}, coordinate {shift:.2g}")
        violations += distance < 0.9 or shift > alpha
    return [CheckResult(name="geometric-median-instability", trials=3, violations=violations, detail="; ".join(details))]


CheckFn = Callable[[np.random.Generator, int], List[CheckResult]]

# (check, trials at scale 1)
SUITE: List[Tuple[CheckFn, int]] = [
    (check_containment, 10_000),
    (check_lipschitz, 10_000),
    (check_affine, 10_000),
    (check_projection, 100_000),
    (check_estimator, 10_000),
    (check_contractivity, 1_000),
    (check_iteration_sensitivity, 100),
    (check_concentration_test, 100),
    (check_score_bounds, 1_000),
    (check_mechanisms, 1_000),
    (check_above_threshold, 1_000),
    (check_geometric_median, 1),
]


def run_certification(scale: Optional[float] = None, seed: Optional[int] = None) -> CertificationReport:
    scale = settings.certify_scale if scale is None else scale
    seed = settings.seed if seed is None else seed
    report = CertificationReport()
    for child, (check, trials) in zip(np.random.SeedSequence(seed).spawn(len(SUITE)), SUITE):
        rng = np.random.default_rng(child)
        results = check(rng, max(1, int(round(trials * scale))))
        for result in results:
            level = logger.info if result.passed else logger.error
            level(f"certify {result.name}: {result.violations} violations in {result.trials} trials {result.detail}")
        report = CertificationReport(checks=report.checks + results)
    return report
