import os

# keep test runs from writing logs/userdp.log
os.environ.setdefault("USERDP_LOG_TO_FILE", "false")

import numpy as np
import pytest

from userdp.core.optimizer import threshold_upsilon
from userdp.core.problem import make_quadratic_instance
from userdp.models import DpSgdConfig, PrivacyBudget


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def budget():
    return PrivacyBudget(epsilon=1.0, delta=1e-6)


@pytest.fixture
def quadratic():
    """d=2, 120 users of 8 tightly clustered samples."""
    return make_quadratic_instance(2, 120, 8, seed=7, beta_target=1.0, noise_std=0.005)


@pytest.fixture
def tight_cfg(budget):
    """B=30 users per step and tau=10, so an i.i.d. step's gradients sit well inside one 1/tau ball."""
    return DpSgdConfig(
        budget=budget,
        eta=1.0,
        tau=10.0,
        varsigma=0.1,
        upsilon=threshold_upsilon(30, 4, budget),
        batch_users_B=30,
    )


@pytest.fixture
def debug_cfg(tight_cfg):
    """Noise-free variant with a threshold an i.i.d. step always clears."""
    return tight_cfg.model_copy(update={"upsilon": 0.9 * 30, "noise_constant": 0.0, "insecure_debug": True})
