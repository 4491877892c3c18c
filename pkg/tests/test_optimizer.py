import math

import numpy as np
import pytest

from userdp.core.optimizer import (
    default_params,
    dpsgd_phase,
    naive_dpsgd_baseline,
    naive_step_sigma,
    nonprivate_sgd,
    partition,
    phase_count,
    phase_sigma,
    phase_step_size,
    run_localization,
    sgd_trajectory,
    threshold_upsilon,
)
from userdp.core.harness import make_instance
from userdp.core.privacy import gaussian_sigma
from userdp.core.problem import (
    excess_risk,
    linear_loss_model,
    make_linear_hard_instance,
    make_quadratic_instance,
    sample_dataset,
)
from userdp.enums import Answer, LossKind
from userdp.errors import InfeasibleConfigurationError, InvalidArgumentError, UnsupportedError
from userdp.models import Dataset, DpSgdConfig, LossModel, PrivacyBudget


def _fixed_point_instance(n, m, d):
    optimum = np.full(d, 0.25)
    model = LossModel(
        kind=LossKind.QUADRATIC,
        lipschitz_G=2.0 * d,
        smooth_beta=1.0,
        radius_D=1.0,
        center=np.zeros(d),
        optimum=optimum,
        hessian=np.eye(d),
        population_mean=optimum,
    )
    return model, Dataset(samples=np.broadcast_to(optimum, (n, m, d)))


def test_partition_discards_remainder():
    assert partition(103, 10) == (10, 3)
    with pytest.raises(InvalidArgumentError):
        partition(5, 10)


def test_fixed_point(debug_cfg, rng):
    model, dataset = _fixed_point_instance(60, 4, 2)
    point, log = dpsgd_phase(dataset, model, debug_cfg, model.optimum, rng)
    np.testing.assert_array_equal(point, model.optimum)
    assert log.scores == pytest.approx([30.0, 30.0])
    assert log.passed
    assert log.answers == [Answer.TOP, Answer.TOP]


def test_single_user_linear_step(budget, rng):
    distribution = make_linear_hard_instance(3, m=2, seed=1, n=1)
    model = linear_loss_model(distribution)
    dataset = sample_dataset(distribution, 1, 2, seed=2)
    cfg = DpSgdConfig(
        budget=budget, eta=0.1, tau=1.0, varsigma=1.0, upsilon=0.5, batch_users_B=1,
        noise_constant=0.0, insecure_debug=True,
    )
    x0 = np.zeros(3)
    point, log = dpsgd_phase(dataset, model, cfg, x0, rng)
    expected = np.clip(x0 + 0.1 * dataset.samples[0].mean(axis=0), -1, 1)
    np.testing.assert_allclose(point, expected)
    assert log.steps == 1


def test_halted_phase_returns_start(quadratic, tight_cfg, rng):
    model, dataset = quadratic
    # upsilon far above B: the test halts at the first step
    cfg = tight_cfg.model_copy(update={"upsilon": 1e6})
    x0 = np.array([0.5, -0.5])
    point, log = dpsgd_phase(dataset, model, cfg, x0, rng)
    np.testing.assert_array_equal(point, x0)
    assert log.answers == [Answer.BOTTOM]
    assert not log.passed
    assert log.steps == 4


def test_step_size_precondition(quadratic, tight_cfg, rng):
    model, dataset = quadratic
    with pytest.raises(InvalidArgumentError):
        dpsgd_phase(dataset, model, tight_cfg.model_copy(update={"eta": 2.5}), model.center, rng)


def test_trajectory_is_deterministic(quadratic, tight_cfg):
    model, dataset = quadratic
    first = sgd_trajectory(dataset, model, tight_cfg, model.center)
    second = sgd_trajectory(dataset, model, tight_cfg, model.center)
    assert first.scores == second.scores
    for a, b in zip(first.iterates, second.iterates):
        np.testing.assert_array_equal(a, b)


def test_phase_improves_risk(quadratic, debug_cfg, rng):
    model, dataset = quadratic
    x0 = np.array([-1.0, 1.0])
    point, log = dpsgd_phase(dataset, model, debug_cfg, x0, rng)
    assert log.passed
    assert excess_risk(model, point) < excess_risk(model, x0)


def test_phase_schedule():
    assert phase_count(400, 25) == 4
    assert phase_count(60, 30) == 1
    with pytest.raises(InvalidArgumentError):
        phase_count(50, 30)
    assert phase_step_size(1.0, 2, 1) == pytest.approx(0.5)
    assert phase_step_size(1.0, 100, 2) == pytest.approx(1 / math.log(100) ** 2)


def test_localization_bookkeeping(quadratic, debug_cfg, rng):
    model, dataset = quadratic
    result = run_localization(dataset, model, debug_cfg, model.center, rng)
    # n=120, B=30: S = 2 phases over 60 + 30 users
    assert len(result.phases) == 2
    assert result.users_used == 90
    assert [log.phase for log in result.phases] == [1, 2]
    assert result.sigmas == [0.0, 0.0]


@pytest.mark.parametrize("seed", range(10))
def test_noise_free_localization_reduces_risk(seed, debug_cfg):
    model, dataset = make_quadratic_instance(2, 400, 8, seed=seed, beta_target=1.0, noise_std=0.005)
    cfg = debug_cfg.model_copy(update={"batch_users_B": 25, "upsilon": 0.9 * 25})
    x0 = np.array([1.0, -1.0])
    result = run_localization(dataset, model, cfg, x0, np.random.default_rng(seed))
    assert all(log.passed for log in result.phases)
    assert excess_risk(model, result.point) < excess_risk(model, x0)


def test_phase_sigma_calibration(tight_cfg):
    eta_s = 0.3
    expected = gaussian_sigma(math.sqrt(2) * 6.0 * eta_s / 10.0, PrivacyBudget(epsilon=0.5, delta=1e-6))
    assert phase_sigma(tight_cfg, eta_s, 2) == pytest.approx(expected)


def test_default_params_formulas(budget):
    n, m, d = 10**9, 100, 16
    cfg = default_params(n, m, d, budget, G=1.0, D=1.0, beta=0.0)
    batch = math.ceil(100 * math.log(m * n * d / 1e-6))
    assert cfg.batch_users_B == batch
    assert cfg.tau == pytest.approx(math.log(n * m * d) / 10)
    assert cfg.varsigma == pytest.approx(1 / cfg.tau)
    steps = n // batch
    assert cfg.upsilon == pytest.approx(0.9 * batch + 2 * math.log(steps / 1e-6))
    expected_eta = min(batch * 10 / math.sqrt(n), 10 / math.sqrt(d * math.log(1e6) * math.log(n * m * d)))
    assert cfg.eta == pytest.approx(expected_eta)
    assert cfg.diagnostics["steps"] == steps


def test_default_params_infeasible(budget):
    with pytest.raises(InfeasibleConfigurationError) as excinfo:
        default_params(1000, 100, 16, budget, G=1.0, D=1.0, beta=1.0)
    assert excinfo.value.required == math.ceil(100 * math.log(100 * 1000 * 16 / 1e-6))


def test_default_params_caps_step(budget):
    cfg = default_params(10**6, 4, 2, budget, G=1e-3, D=1.0, beta=4.0, batch_users=100)
    assert cfg.batch_users_B == 100
    assert cfg.eta == pytest.approx(0.5)


def test_tau_scales_with_m(budget):
    first = default_params(10**6, 100, 4, budget, G=1.0, D=1.0, beta=0.0, batch_users=100)
    second = default_params(10**6, 200, 4, budget, G=1.0, D=1.0, beta=0.0, batch_users=100)
    ratio = second.tau / first.tau
    log_ratio = math.log(10**6 * 200 * 4) / math.log(10**6 * 100 * 4)
    assert ratio == pytest.approx(log_ratio / math.sqrt(2))


def test_default_params_need_delta():
    with pytest.raises(UnsupportedError):
        default_params(10**6, 4, 2, PrivacyBudget(epsilon=1.0), G=1.0, D=1.0, beta=0.0)


def test_naive_baseline_zero_share(quadratic, budget, rng):
    model, dataset = quadratic
    with pytest.raises(UnsupportedError):
        naive_dpsgd_baseline(dataset, model, budget, 0.5, 4, rng, budget_share=0.0)


def test_naive_baseline_debug_matches_nonprivate(quadratic, budget):
    model, dataset = quadratic
    noise_free = naive_dpsgd_baseline(dataset, model, budget, 0.5, 6, np.random.default_rng(0), insecure_debug=True)
    np.testing.assert_array_equal(noise_free, nonprivate_sgd(dataset, model, 0.5, 6))


def test_naive_step_sigma(quadratic, budget):
    model, _ = quadratic
    steps, users = 4, 30
    eps0 = 1.0 / (2 * math.sqrt(2 * steps * math.log(2 / 1e-6)))
    sensitivity = 2 * model.lipschitz_G * math.sqrt(2) / users
    expected = gaussian_sigma(sensitivity, PrivacyBudget(epsilon=eps0, delta=1e-6 / 8))
    assert naive_step_sigma(model, budget, steps, users) == pytest.approx(expected)


def test_nonprivate_sgd_reduces_risk(quadratic):
    model, dataset = quadratic
    x0 = np.array([1.0, -1.0])
    point = nonprivate_sgd(dataset, model, 1.0, 120, x0=x0)
    assert excess_risk(model, point) < excess_risk(model, x0)


def test_threshold_upsilon(budget):
    assert threshold_upsilon(30, 4, budget) == pytest.approx(27 + 2 * math.log(4e6))
    with pytest.raises(UnsupportedError):
        threshold_upsilon(30, 4, PrivacyBudget(epsilon=1.0))


def test_insecure_debug_zeroes_localization_noise(quadratic, tight_cfg, rng):
    model, dataset = quadratic
    cfg = tight_cfg.model_copy(update={"insecure_debug": True})
    assert cfg.noise_constant == 6.0
    assert phase_sigma(cfg, 0.3, 2) == 0.0
    result = run_localization(dataset, model, cfg, model.center, rng)
    assert result.sigmas == [0.0, 0.0]


@pytest.mark.parametrize("seed", range(20))
def test_default_parameters_pass_on_iid_users(seed):
    d, n, m = 4, 8192, 16
    model, dataset = make_instance(LossKind.QUADRATIC, d, n, m, seed)
    budget = PrivacyBudget(epsilon=1.0, delta=1e-6)
    cfg = default_params(n, m, d, budget, model.lipschitz_G, model.radius_D, model.smooth_beta)
    x0 = model.center
    point, log = dpsgd_phase(dataset, model, cfg, x0, np.random.default_rng(seed))
    assert log.passed
    assert min(log.scores) > cfg.upsilon
    assert excess_risk(model, point) < excess_risk(model, x0)


def test_shared_threshold_covers_every_phase(budget):
    n, m, d = 10**6, 4, 2
    cfg = default_params(n, m, d, budget, G=1.0, D=1.0, beta=0.0, batch_users=1000)
    batch = cfg.batch_users_B
    for s in range(1, phase_count(n, batch) + 1):
        phase_steps = (n // 2**s) // batch
        assert cfg.upsilon >= threshold_upsilon(batch, phase_steps, budget)
