"""Empirical checks of the stability and utility claims.

Neighboring pairs differ in exactly one user. Sensitivity checks run the
noiseless SGD map on both datasets with identical partitions, so any gap is
caused by the swapped user alone.
"""

import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import cdist

from ..enums import Alignment, Answer, LossKind, Pipeline
from ..errors import (
    ConstructionError,
    InfeasibleConfigurationError,
    InvalidArgumentError,
    UserDPError,
)
from ..logging_config import logger, settings
from ..models import (
    Dataset,
    DpSgdConfig,
    LossModel,
    NeighborSpec,
    PrivacyBudget,
    RobustStatKind,
    SensitivityReport,
    UserRecord,
    UtilityRecord,
    UtilitySummary,
)
from .optimizer import (
    default_params,
    naive_dpsgd_baseline,
    nonprivate_sgd,
    run_localization,
    sgd_trajectory,
)
from .problem import (
    batch_avg_gradients,
    excess_risk,
    linear_loss_model,
    make_linear_hard_instance,
    make_quadratic_instance,
    sample_dataset,
    sample_user,
)
from .robust_stats import coord_robust_stat, geometric_median_weiszfeld

# spacing of injected bad gradients, in units of 1/tau
SCATTER_SPACING = 3.0


def trial_seeds(root_seed: int, count: int) -> List[int]:
    """Independent per-trial seeds derived from one root seed."""
    return [int(child.generate_state(1)[0]) for child in np.random.SeedSequence(root_seed).spawn(count)]


def max_ball_count(gradients: np.ndarray, radius: float, centers: Optional[np.ndarray] = None) -> int:
    """Largest number of gradients inside one l-inf ball of `radius` centred at a candidate."""
    centers = gradients if centers is None else centers
    return int((cdist(centers, gradients, metric="chebyshev") <= radius).sum(axis=1).max())


def _step_one_gradients(dataset: Dataset, model: LossModel, x0: np.ndarray, batch: int) -> np.ndarray:
    return batch_avg_gradients(model, dataset.samples[:batch], x0)


def _user_with_gradient(model: LossModel, x0: np.ndarray, target: np.ndarray, m: int) -> UserRecord:
    """A user whose m identical samples produce user-average gradient `target` at x0."""
    if model.kind == LossKind.LINEAR:
        point = -target
    else:
        point = x0 - np.linalg.solve(model.hessian, target)
    return UserRecord(samples=np.tile(point, (m, 1)))


def _check_aligned(
    dataset: Dataset, swapped: Dataset, model: LossModel, x0: np.ndarray, batch: int, rho: float
) -> None:
    before = _step_one_gradients(dataset, model, x0, batch)
    after = _step_one_gradients(swapped, model, x0, batch)
    centers = np.vstack([before, after, coord_robust_stat(before), coord_robust_stat(after)])
    inside_before = (cdist(centers, before, metric="chebyshev") <= rho).sum(axis=1)
    inside_after = (cdist(centers, after, metric="chebyshev") <= rho).sum(axis=1)
    common = np.minimum(inside_before, inside_after)
    required = math.ceil(2 * batch / 3)
    if common.max() < required:
        raise ConstructionError(
            f"no common l-inf ball of radius {rho:.6g} holds {required} of {batch} step-1 gradients on both sides",
            diagnostics={
                "rho": rho,
                "required": required,
                "best_common_count": int(common.max()),
                "count_before": int(inside_before.max()),
                "count_after": int(inside_after.max()),
            },
        )


def _scattered_pair(
    dataset: Dataset, spec: NeighborSpec, model: LossModel, x0: np.ndarray, cfg: DpSgdConfig
) -> Tuple[Dataset, Dataset]:
    batch = cfg.batch_users_B
    if batch < 4:
        raise ConstructionError(
            f"B={batch} is too small to leave fewer than B/3 gradients in every ball",
            diagnostics={"batch": batch, "required_batch": 4},
        )
    kept = math.ceil(batch / 3) - 2
    step_users = [i for i in range(batch) if i != spec.swap_user_index]
    good, bad = step_users[:kept], step_users[kept:]

    gradients = _step_one_gradients(dataset, model, x0, batch)
    spacing = SCATTER_SPACING / cfg.tau
    base = gradients.max(axis=0) + spacing
    ones = np.ones(model.d)

    samples = dataset.samples.copy()
    for j, index in enumerate(bad):
        samples[index] = _user_with_gradient(model, x0, base + j * spacing * ones, dataset.m).samples
    injected = Dataset(samples=samples, seed=dataset.seed, distribution=dataset.distribution)
    replacement = _user_with_gradient(model, x0, base + len(bad) * spacing * ones, dataset.m)
    swapped = injected.with_user(spec.swap_user_index, replacement)

    diagnostics: Dict[str, float] = {"kept_good": len(good), "injected_bad": len(bad)}
    for name, candidate in (("before", injected), ("after", swapped)):
        step_one = _step_one_gradients(candidate, model, x0, batch)
        diagnostics[f"count_{name}"] = max_ball_count(step_one, 1.0 / cfg.tau)
        diagnostics[f"count_{name}_double_radius"] = max_ball_count(step_one, 2.0 / cfg.tau)
    if max(diagnostics["count_before"], diagnostics["count_after"]) >= batch / 3:
        raise ConstructionError("scatter left B/3 or more gradients in a 1/tau ball", diagnostics=diagnostics)
    logger.debug(f"adversarial scatter: {diagnostics}")
    return injected, swapped


def neighboring_pair(
    dataset: Dataset,
    spec: NeighborSpec,
    rng: np.random.Generator,
    model: Optional[LossModel] = None,
    x0: Optional[np.ndarray] = None,
    cfg: Optional[DpSgdConfig] = None,
) -> Tuple[Dataset, Dataset]:
    """Build (D, D') that differ exactly in user `spec.swap_user_index`.

    aligned and adversarial-scatter pairs are checked by direct ball counts over
    the step-1 gradients at x0 and need the model and config that define them.
    """
    if spec.swap_user_index >= dataset.n:
        raise InvalidArgumentError(f"swap index {spec.swap_user_index} out of range for n={dataset.n}")
    if spec.replacement is not None and spec.replacement.samples.shape != dataset.samples.shape[1:]:
        raise InvalidArgumentError("replacement user does not match the dataset's (m, d)")

    if spec.alignment == Alignment.UNCONSTRAINED:
        replacement = spec.replacement
        if replacement is None:
            if dataset.distribution is None:
                raise ConstructionError("no replacement given and the dataset has no distribution to draw from")
            replacement = sample_user(dataset.distribution, dataset.m, rng)
        return dataset, dataset.with_user(spec.swap_user_index, replacement)

    if model is None or cfg is None:
        raise InvalidArgumentError(f"{spec.alignment.value} pairs need the loss model and the SGD config")
    x0 = model.center if x0 is None else np.asarray(x0, dtype=np.float64)
    if spec.swap_user_index >= cfg.batch_users_B:
        raise InvalidArgumentError("the swapped user must belong to the first step's block")

    if spec.alignment == Alignment.ADVERSARIAL_SCATTER:
        return _scattered_pair(dataset, spec, model, x0, cfg)

    rho = spec.rho if spec.rho is not None else 1.0 / cfg.tau
    replacement = spec.replacement
    if replacement is None:
        # an outlier: the mirror image of the original user
        replacement = UserRecord(samples=-dataset.samples[spec.swap_user_index])
    swapped = dataset.with_user(spec.swap_user_index, replacement)
    _check_aligned(dataset, swapped, model, x0, cfg.batch_users_B, rho)
    return dataset, swapped


def iteration_gap_bound(cfg: DpSgdConfig, rho: Optional[float] = None) -> float:
    """eta * (4 rho + 2 varsigma), with rho = 1/tau by default."""
    rho = 1.0 / cfg.tau if rho is None else rho
    return cfg.eta * (4.0 * rho + 2.0 * cfg.varsigma)


def measure_iteration_sensitivity(
    model: LossModel,
    pair: Tuple[Dataset, Dataset],
    cfg: DpSgdConfig,
    rng: Optional[np.random.Generator] = None,
    x0: Optional[np.ndarray] = None,
    rho: Optional[float] = None,
) -> SensitivityReport:
    # rng is accepted for a coupled call signature; the checked map is noiseless
    first, second = pair
    if first.samples.shape != second.samples.shape:
        raise InvalidArgumentError(
            f"partition mismatch: {first.samples.shape} vs {second.samples.shape}"
        )
    x0 = model.center if x0 is None else x0
    left = sgd_trajectory(first, model, cfg, x0)
    right = sgd_trajectory(second, model, cfg, x0)

    gaps = [float(np.max(np.abs(x - y))) for x, y in zip(left.iterates, right.iterates)]
    score_gaps = [abs(s - t) for s, t in zip(left.scores, right.scores)]
    batch = cfg.batch_users_B
    return SensitivityReport.from_gaps(
        per_step_linf_gap=gaps,
        base_gap_bound=iteration_gap_bound(cfg, rho),
        score_gaps=score_gaps,
        score_gap_bound=(2 * batch - 1) / batch,
    )


def make_instance(
    loss: LossKind,
    d: int,
    n: int,
    m: int,
    seed: int,
    beta: Optional[float] = None,
    noise_std: Optional[float] = None,
    truncation_constant: Optional[float] = None,
    radius: float = 1.0,
) -> Tuple[LossModel, Dataset]:
    if loss == LossKind.QUADRATIC:
        return make_quadratic_instance(
            d,
            n,
            m,
            seed,
            beta_target=settings.quadratic_beta if beta is None else beta,
            radius_D=radius,
            noise_std=settings.quadratic_noise_std if noise_std is None else noise_std,
        )
    instance_seed, sample_seed = np.random.SeedSequence(seed).spawn(2)
    distribution = make_linear_hard_instance(
        d,
        m,
        seed=int(instance_seed.generate_state(1)[0]),
        n=n,
        truncation_constant=settings.truncation_constant if truncation_constant is None else truncation_constant,
    )
    dataset = sample_dataset(distribution, n, m, seed=int(sample_seed.generate_state(1)[0]))
    return linear_loss_model(distribution), dataset


def nonprivate_step_size(model: LossModel, n: int, m: int) -> float:
    """D/G * sqrt(m/n), capped at 2/beta."""
    eta = model.radius_D / model.lipschitz_G * math.sqrt(m / n)
    if model.smooth_beta > 0:
        eta = min(eta, 2.0 / model.smooth_beta)
    return eta


def run_pipeline(
    pipeline: Pipeline,
    model: LossModel,
    dataset: Dataset,
    budget: PrivacyBudget,
    rng: np.random.Generator,
    kind: Optional[RobustStatKind] = None,
    batch_constant: Optional[float] = None,
    tau_constant: Optional[float] = None,
    noise_constant: Optional[float] = None,
    insecure_debug: bool = False,
    batch_users: Optional[int] = None,
) -> Tuple[np.ndarray, Optional[bool]]:
    """Returns (point, passed); passed is None for pipelines without a concentration test."""
    n, m, d = dataset.n, dataset.m, dataset.d
    if pipeline == Pipeline.NON_PRIVATE:
        return nonprivate_sgd(dataset, model, nonprivate_step_size(model, n, m), steps=n), None

    cfg = default_params(
        n,
        m,
        d,
        budget,
        model.lipschitz_G,
        model.radius_D,
        model.smooth_beta,
        kind=kind,
        batch_constant=batch_constant,
        tau_constant=tau_constant,
        noise_constant=noise_constant,
        insecure_debug=insecure_debug,
        batch_users=batch_users,
    )
    if pipeline == Pipeline.NAIVE_BASELINE:
        steps = n // cfg.batch_users_B
        point = naive_dpsgd_baseline(
            dataset, model, budget, cfg.eta, steps, rng, insecure_debug=insecure_debug
        )
        return point, None

    result = run_localization(dataset, model, cfg, model.center, rng)
    return result.point, all(log.passed for log in result.phases)


def run_utility_experiment(
    grid: Sequence[Tuple[int, int]],
    d: int,
    budget: PrivacyBudget,
    seeds: Sequence[int],
    pipeline: Pipeline,
    loss: LossKind = LossKind.QUADRATIC,
    beta: Optional[float] = None,
    noise_std: Optional[float] = None,
    kind: Optional[RobustStatKind] = None,
    batch_constant: Optional[float] = None,
    tau_constant: Optional[float] = None,
    noise_constant: Optional[float] = None,
    truncation_constant: Optional[float] = None,
    insecure_debug: bool = False,
    batch_users: Optional[int] = None,
) -> Tuple[List[UtilityRecord], List[UtilitySummary]]:
    """Excess risk per (grid point, seed), then mean and standard error per grid point.

    Infeasible grid points are recorded with status "infeasible" and skipped.
    """
    if not grid:
        raise InvalidArgumentError("grid must contain at least one (n, m) point")
    if not seeds:
        raise InvalidArgumentError("need at least one seed")

    records: List[UtilityRecord] = []
    summaries: List[UtilitySummary] = []
    for n, m in grid:
        point_records = []
        for seed in seeds:
            rng = np.random.default_rng([seed, n, m])
            try:
                model, dataset = make_instance(loss, d, n, m, seed, beta, noise_std, truncation_constant)
                point, passed = run_pipeline(
                    pipeline,
                    model,
                    dataset,
                    budget,
                    rng,
                    kind=kind,
                    batch_constant=batch_constant,
                    tau_constant=tau_constant,
                    noise_constant=noise_constant,
                    insecure_debug=insecure_debug,
                    batch_users=batch_users,
                )
                record = UtilityRecord(
                    n=n, m=m, d=d, seed=seed, pipeline=pipeline,
                    excess_risk=excess_risk(model, point), passed=passed,
                )
            except InfeasibleConfigurationError as e:
                logger.warning(f"grid point n={n} m={m} seed={seed}: {e}")
                record = UtilityRecord(n=n, m=m, d=d, seed=seed, pipeline=pipeline, status="infeasible")
            except UserDPError as e:
                logger.error(f"grid point n={n} m={m} seed={seed} failed: {e}")
                record = UtilityRecord(n=n, m=m, d=d, seed=seed, pipeline=pipeline, status="error")
            point_records.append(record)
        records.extend(point_records)
        summaries.append(summarize(point_records, n, m, d, pipeline))
    return records, summaries


def summarize(
    records: Sequence[UtilityRecord], n: int, m: int, d: int, pipeline: Pipeline
) -> UtilitySummary:
    values = np.array([r.excess_risk for r in records if r.status == "ok"], dtype=np.float64)
    failures = len(records) - values.size
    if values.size == 0:
        status = records[0].status if records else "error"
        return UtilitySummary(n=n, m=m, d=d, pipeline=pipeline, failures=failures, status=status)
    stderr = float(values.std(ddof=1) / math.sqrt(values.size)) if values.size > 1 else 0.0
    return UtilitySummary(
        n=n,
        m=m,
        d=d,
        pipeline=pipeline,
        mean=float(values.mean()),
        stderr=stderr,
        count=int(values.size),
        failures=failures,
    )


def counterexample_geometric_median(alpha: float) -> Tuple[np.ndarray, np.ndarray, float]:
    """Two 4-point sets at Hausdorff distance alpha whose geometric medians are ~1 apart."""
    if not 0 < alpha <= 0.1:
        raise InvalidArgumentError(f"alpha must lie in (0, 0.1], got {alpha}")
    first, second = counterexample_sets(alpha)
    median = geometric_median_weiszfeld(first).point
    shifted = geometric_median_weiszfeld(second).point
    return median, shifted, float(np.linalg.norm(median - shifted))


def counterexample_sets(alpha: float) -> Tuple[np.ndarray, np.ndarray]:
    first = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [1.0, alpha]])
    second = np.array([[0.0, 0.0], [0.0, alpha], [1.0, 0.0], [1.0, 0.0]])
    return first, second


def coordinate_median_shift(alpha: float) -> float:
    """l-inf move of the coordinate-wise median on the same pair of sets."""
    first, second = counterexample_sets(alpha)
    return float(np.max(np.abs(coord_robust_stat(first) - coord_robust_stat(second))))


def halted_at_first_step(answers: Sequence[Answer]) -> bool:
    return len(answers) == 1 and answers[0] == Answer.BOTTOM
