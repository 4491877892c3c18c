"""
Robust user-level DP-SGD.

dpsgd_phase
    one pass of projected SGD over disjoint blocks of B users. Each step
    aggregates the B user-average gradients with the robust estimator; the
    concentration test then runs post hoc on the stored per-step gradient sets.
    Output is the average iterate when every step passes, x0 otherwise.

localize
    S phases on disjoint, geometrically shrinking user sets with shrinking
    step sizes; only each phase's average iterate is privatized (Gaussian).

default_params
    the parameterization the analysis prescribes, with admissibility
    diagnostics attached to the returned config.

naive_dpsgd_baseline / nonprivate_sgd
    comparison pipelines: per-step Gaussian noise under advanced
    composition, and plain minibatch SGD.
"""

import math
from typing import Callable, Optional, Tuple

import numpy as np

from ..errors import InfeasibleConfigurationError, InvalidArgumentError, UnsupportedError
from ..logging_config import logger, settings
from ..models import (
    Dataset,
    DpSgdConfig,
    LocalizationResult,
    LossModel,
    PrivacyBudget,
    RobustStatKind,
    TrajectoryLog,
)
from .concentration import all_passed, answer_score_stream, concentration_score
from .estimator import robust_gradient_estimate
from .privacy import gaussian_noise, gaussian_sigma
from .problem import batch_avg_gradients, in_domain, project_to_domain


def _log1(value: float) -> float:
    return max(math.log(value), 1.0)


def check_step_size(model: LossModel, eta: float) -> None:
    """eta <= 2/beta keeps the gradient step non-expansive in l-inf."""
    if model.smooth_beta > 0 and eta > 2.0 / model.smooth_beta:
        raise InvalidArgumentError(
            f"eta={eta} violates the contractivity precondition eta <= 2/beta = {2.0 / model.smooth_beta}"
        )


def partition(n_users: int, batch: int) -> Tuple[int, int]:
    """(steps, discarded): step t uses users [t*B, (t+1)*B), the remainder is dropped."""
    if batch < 1:
        raise InvalidArgumentError(f"batch size must be >= 1, got {batch}")
    steps = n_users // batch
    if steps == 0:
        raise InvalidArgumentError(f"need at least one batch of {batch} users, got {n_users}")
    return steps, n_users - steps * batch


def _check_inputs(dataset: Dataset, model: LossModel, x0: np.ndarray) -> np.ndarray:
    x0 = np.asarray(x0, dtype=np.float64)
    if dataset.d != model.d or x0.shape != (model.d,):
        raise InvalidArgumentError(
            f"dimension mismatch: dataset d={dataset.d}, model d={model.d}, x0 {x0.shape}"
        )
    if not in_domain(model, x0):
        raise InvalidArgumentError("x0 must lie in the domain")
    return x0


def sgd_trajectory(dataset: Dataset, model: LossModel, cfg: DpSgdConfig, x0: np.ndarray) -> TrajectoryLog:
    """The noiseless SGD-with-robust-estimation map: iterates, estimates and scores, no test."""
    x0 = _check_inputs(dataset, model, x0)
    check_step_size(model, cfg.eta)
    batch = cfg.batch_users_B
    steps, discarded = partition(dataset.n, batch)
    if discarded:
        logger.info(f"partition: {steps} steps of {batch} users, {discarded} remainder users discarded")

    estimator = cfg.estimator_config()
    current = x0
    iterates, estimates, scores = [], [], []
    for t in range(steps):
        block = dataset.samples[t * batch : (t + 1) * batch]
        gradients = batch_avg_gradients(model, block, current)
        scores.append(concentration_score(gradients, cfg.tau))
        estimate = robust_gradient_estimate(gradients, estimator)
        current = project_to_domain(model, current - cfg.eta * estimate)
        estimates.append(estimate)
        iterates.append(current)

    return TrajectoryLog(
        iterates=iterates,
        gradient_estimates=estimates,
        scores=scores,
        discarded_users=discarded,
    )


def dpsgd_phase(
    dataset: Dataset,
    model: LossModel,
    cfg: DpSgdConfig,
    x0: np.ndarray,
    rng: np.random.Generator,
    phase: int = 1,
) -> Tuple[np.ndarray, TrajectoryLog]:
    trajectory = sgd_trajectory(dataset, model, cfg, x0)
    concentration = cfg.concentration_config(trajectory.steps, dataset.n, dataset.m, dataset.d)
    answers = answer_score_stream(trajectory.scores, concentration, rng)
    passed = all_passed(answers, trajectory.steps)

    log = trajectory.model_copy(update={"phase": phase, "answers": answers, "passed": passed})
    if passed:
        point = np.mean(np.stack(log.iterates), axis=0)
    else:
        point = np.asarray(x0, dtype=np.float64).copy()
    logger.info(
        f"phase {phase}: {log.steps} steps, test {'passed' if passed else 'halted'} after {len(answers)} answers"
    )
    return point, log


def threshold_upsilon(batch: int, steps: int, budget: PrivacyBudget) -> float:
    """upsilon = 0.9 B + 2 ln(T/delta) / eps."""
    if budget.delta <= 0:
        raise UnsupportedError("the concentration threshold requires delta > 0")
    return 0.9 * batch + 2.0 * math.log(steps / budget.delta) / budget.epsilon


def phase_count(n: int, batch: int) -> int:
    """S = max(1, floor(log2(n / B))); every phase then has at least B users."""
    if n < 2 * batch:
        raise InvalidArgumentError(
            f"localization needs at least 2B = {2 * batch} users, got n={n}"
        )
    return max(1, int(math.floor(math.log2(n / batch))))


def phase_step_size(eta: float, m: int, phase: int) -> float:
    return eta / max(math.log(m), 2.0) ** phase


def closed_form_sigma(
    eta_s: float, G: float, n: int, m: int, d: int, budget: PrivacyBudget, noise_constant: float
) -> float:
    """noise_constant * eta_s * G * sqrt(d ln(e^eps / delta) ln(nmd)) / (sqrt(m) eps)."""
    if budget.delta <= 0:
        raise UnsupportedError("the localization noise requires delta > 0")
    log_term = (budget.epsilon - math.log(budget.delta)) * _log1(n * m * d)
    return noise_constant * eta_s * G * math.sqrt(d * log_term) / (math.sqrt(m) * budget.epsilon)


def phase_sigma(cfg: DpSgdConfig, eta_s: float, d: int) -> float:
    """Gaussian calibration for l2 sensitivity sqrt(d) * noise_constant * eta_s / tau at (eps/2, delta).

    insecure_debug turns the localization noise off.
    """
    if cfg.insecure_debug:
        return 0.0
    sensitivity = math.sqrt(d) * cfg.noise_constant * eta_s / cfg.tau
    return gaussian_sigma(sensitivity, cfg.budget.split(0.5))


def run_localization(
    dataset: Dataset,
    model: LossModel,
    cfg: DpSgdConfig,
    x0: np.ndarray,
    rng: np.random.Generator,
) -> LocalizationResult:
    x0 = _check_inputs(dataset, model, x0)
    check_step_size(model, cfg.eta)
    n, m, d = dataset.n, dataset.m, dataset.d
    phases = phase_count(n, cfg.batch_users_B)
    if cfg.insecure_debug:
        logger.warning("insecure_debug: localization noise suppressed, output is NOT private")
    logger.info(f"localization: S = max(1, floor(log2(n/B))) = {phases} phases for n={n}, B={cfg.batch_users_B}")

    current = x0
    offset = 0
    logs, sigmas = [], []
    for s in range(1, phases + 1):
        n_s = n // 2**s
        eta_s = phase_step_size(cfg.eta, m, s)
        phase_cfg = cfg.model_copy(update={"eta": eta_s})
        block = dataset.take(range(offset, offset + n_s))
        offset += n_s

        average, log = dpsgd_phase(block, model, phase_cfg, current, rng, phase=s)
        sigma = phase_sigma(cfg, eta_s, d)
        closed = closed_form_sigma(eta_s, model.lipschitz_G, n, m, d, cfg.budget, cfg.noise_constant)
        logger.info(
            f"phase {s}: n_s = floor(n/2^s) = {n_s}, eta_s = eta/max(ln m, 2)^s = {eta_s:.6g}, "
            f"sigma_s = {sigma:.6g} (closed form {closed:.6g})"
        )
        if closed < sigma:
            logger.warning(f"phase {s}: closed-form sigma {closed:.6g} is below the calibrated {sigma:.6g}")

        current = project_to_domain(model, average + gaussian_noise(sigma, d, rng))
        logs.append(log)
        sigmas.append(sigma)

    return LocalizationResult(point=current, phases=logs, sigmas=sigmas, users_used=offset)


def localize(
    dataset: Dataset,
    model: LossModel,
    cfg: DpSgdConfig,
    x0: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    return run_localization(dataset, model, cfg, x0, rng).point


def default_params(
    n: int,
    m: int,
    d: int,
    budget: PrivacyBudget,
    G: float,
    D: float,
    beta: float,
    kind: Optional[RobustStatKind] = None,
    batch_constant: Optional[float] = None,
    tau_constant: Optional[float] = None,
    noise_constant: Optional[float] = None,
    insecure_debug: bool = False,
    batch_users: Optional[int] = None,
) -> DpSgdConfig:
    """
    B       = ceil(batch_constant * ln(mnd/delta) / eps) unless batch_users is given
    tau     = tau_constant * G * ln(nmd) / sqrt(m)
    varsigma = 1 / tau
    upsilon = 0.9 B + 2 ln(T/delta) / eps, with T = floor(n / B)
    eta     = D/G * min(B sqrt(m)/sqrt(n), sqrt(m) eps / sqrt(d ln(1/delta) ln(nmd))), capped at 2/beta
    """
    if min(n, m, d) < 1 or G <= 0 or D <= 0 or beta < 0:
        raise InvalidArgumentError("need n, m, d >= 1, G > 0, D > 0 and beta >= 0")
    if budget.delta <= 0:
        raise UnsupportedError("the default parameterization requires delta > 0")
    batch_constant = settings.batch_constant if batch_constant is None else batch_constant
    tau_constant = settings.tau_constant if tau_constant is None else tau_constant
    noise_constant = settings.noise_constant if noise_constant is None else noise_constant
    eps, delta = budget.epsilon, budget.delta
    log_nmd = _log1(n * m * d)

    if batch_users is None:
        batch = math.ceil(batch_constant * math.log(m * n * d / delta) / eps)
        logger.info(f"B = ceil({batch_constant} * ln(mnd/delta) / eps) = {batch}")
    else:
        batch = batch_users
        logger.info(f"B = {batch} (override)")
    if n < batch:
        raise InfeasibleConfigurationError(
            f"n={n} users is fewer than one batch of B={batch} users",
            required=batch,
        )
    steps = n // batch
    tau = tau_constant * G * log_nmd / math.sqrt(m)
    # one threshold for every localization phase: phase s runs T_s <= T steps
    upsilon = threshold_upsilon(batch, steps, budget)
    eta = (D / G) * min(
        batch * math.sqrt(m) / math.sqrt(n),
        math.sqrt(m) * eps / math.sqrt(d * math.log(1.0 / delta) * log_nmd),
    )
    if beta > 0:
        eta = min(eta, 2.0 / beta)

    beta_max = (G / D) * (
        math.sqrt(n) * eps / (math.sqrt(m) * math.log(n * m * d / delta))
        + math.sqrt(d * math.log(1.0 / delta) * log_nmd) / (math.sqrt(m) * eps)
    )
    min_n = math.log(n * d / delta) ** 2 / eps
    sensitivity_product = 6.0 * beta * eta * batch
    diagnostics = {
        "steps": float(steps),
        "beta_max": beta_max,
        "beta_admissible": beta <= beta_max,
        "min_n": min_n,
        "n_condition_met": n >= min_n,
        "query_sensitivity_product": sensitivity_product,
        "query_sensitivity_ok": sensitivity_product <= 1.0,
        "epsilon_ok": eps <= settings.epsilon_warning,
        "sigma_closed_form_phase1": closed_form_sigma(
            phase_step_size(eta, m, 1), G, n, m, d, budget, noise_constant
        ),
    }

    logger.info(f"T = floor(n / B) = {steps}")
    logger.info(f"tau = {tau_constant} * G * ln(nmd) / sqrt(m) = {tau:.6g}")
    logger.info(f"varsigma = 1 / tau = {1.0 / tau:.6g}")
    logger.info(f"upsilon = 0.9 B + 2 ln(T/delta) / eps = {upsilon:.6g}")
    logger.info(f"eta = D/G * min(B sqrt(m/n), sqrt(m) eps / sqrt(d ln(1/delta) ln(nmd))) capped at 2/beta = {eta:.6g}")
    if not diagnostics["epsilon_ok"]:
        logger.warning(f"epsilon={eps} exceeds {settings.epsilon_warning}; the analysis assumes eps = O(1)")
    if not diagnostics["beta_admissible"]:
        logger.warning(f"beta={beta} exceeds the admissible smoothness {beta_max:.6g}")
    if not diagnostics["n_condition_met"]:
        logger.warning(f"n={n} is below ln^2(nd/delta)/eps = {min_n:.6g}")
    if not diagnostics["query_sensitivity_ok"]:
        logger.warning(f"6 beta eta B = {sensitivity_product:.6g} > 1; score sensitivity bound not guaranteed")

    return DpSgdConfig(
        budget=budget,
        eta=eta,
        tau=tau,
        varsigma=1.0 / tau,
        upsilon=upsilon,
        batch_users_B=batch,
        kind=kind or RobustStatKind(trim_fraction=settings.trim_fraction),
        noise_constant=noise_constant,
        insecure_debug=insecure_debug,
        diagnostics=diagnostics,
    )


def _minibatch_sgd(
    dataset: Dataset,
    model: LossModel,
    eta: float,
    steps: int,
    x0: Optional[np.ndarray],
    perturb: Callable[[np.ndarray], np.ndarray],
) -> np.ndarray:
    x0 = _check_inputs(dataset, model, model.center if x0 is None else x0)
    check_step_size(model, eta)
    if steps < 1:
        raise InvalidArgumentError(f"steps must be >= 1, got {steps}")
    per_step = dataset.n // steps
    if per_step < 1:
        raise InvalidArgumentError(f"{steps} steps need at least {steps} users, got {dataset.n}")

    current = x0
    total = np.zeros(model.d)
    for t in range(steps):
        block = dataset.samples[t * per_step : (t + 1) * per_step]
        gradient = perturb(batch_avg_gradients(model, block, current).mean(axis=0))
        current = project_to_domain(model, current - eta * gradient)
        total += current
    return total / steps


def nonprivate_sgd(
    dataset: Dataset,
    model: LossModel,
    eta: float,
    steps: int,
    x0: Optional[np.ndarray] = None,
) -> np.ndarray:
    """One-pass minibatch projected SGD on disjoint blocks of floor(n/T) users; average iterate."""
    return _minibatch_sgd(dataset, model, eta, steps, x0, lambda gradient: gradient)


def naive_step_sigma(model: LossModel, budget: PrivacyBudget, steps: int, per_step_users: int) -> float:
    """Per-step sigma under advanced composition.

    eps_0 = eps / (2 sqrt(2 T ln(2/delta))), delta_0 = delta / (2T),
    l2 sensitivity 2 G sqrt(d) / B_step.
    """
    if budget.delta <= 0:
        raise UnsupportedError("the per-step Gaussian baseline requires delta > 0")
    eps0 = budget.epsilon / (2.0 * math.sqrt(2.0 * steps * math.log(2.0 / budget.delta)))
    delta0 = budget.delta / (2.0 * steps)
    sensitivity = 2.0 * model.lipschitz_G * math.sqrt(model.d) / per_step_users
    return gaussian_sigma(sensitivity, PrivacyBudget(epsilon=eps0, delta=delta0))


def naive_dpsgd_baseline(
    dataset: Dataset,
    model: LossModel,
    budget: PrivacyBudget,
    eta: float,
    steps: int,
    rng: np.random.Generator,
    x0: Optional[np.ndarray] = None,
    budget_share: float = 1.0,
    insecure_debug: bool = False,
) -> np.ndarray:
    """Standard user-level DP-SGD: Gaussian noise on every step's mean gradient."""
    if budget_share <= 0:
        raise UnsupportedError(f"the baseline needs a positive budget share, got {budget_share}")
    if steps < 1 or dataset.n < steps:
        raise InvalidArgumentError(f"need 1 <= steps <= n, got steps={steps}, n={dataset.n}")
    if insecure_debug:
        logger.warning("insecure_debug: baseline noise suppressed, output is NOT private")
        sigma = 0.0
    else:
        sigma = naive_step_sigma(model, budget.split(budget_share), steps, dataset.n // steps)
    logger.info(f"naive baseline: {steps} steps, per-step sigma = {sigma:.6g}")
    return _minibatch_sgd(
        dataset, model, eta, steps, x0, lambda gradient: gradient + gaussian_noise(sigma, model.d, rng)
    )