"""
Synthetic convex problems over an l-inf ball.

Two loss families are provided:

1. quadratic-diag-dominant
   f(x; z) = 1/2 (x - z)^T A (x - z) with a single symmetric, diagonally
   dominant A (||A||_inf = beta). Diagonal dominance is what makes a gradient
   step with eta <= 2/beta non-expansive in l-inf.

2. linear (hard instance)
   f(x; z) = -<x, z>, z[k] ~ Normal(mu[k], m) truncated to [-G, G] with
   G = c * sqrt(m * ln(mnd)). The population minimizer over [-1, 1]^d is
   sign(mu), so excess risk and the weighted sign error have closed forms.

All randomness comes from explicit seeds; generators are pure functions of
(parameters, seed).
"""

import math
from typing import Optional, Tuple, Union

import numpy as np
from scipy import stats

from ..enums import DistributionKind, LossKind
from ..errors import InvalidArgumentError, UnsupportedError
from ..logging_config import logger
from ..models import Dataset, Distribution, LossModel, UserRecord

DOMAIN_TOLERANCE = 1e-9


def project_linf(x: np.ndarray, center: np.ndarray, radius: float) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    center = np.asarray(center, dtype=np.float64)
    if x.shape != center.shape:
        raise InvalidArgumentError(f"dimension mismatch: x {x.shape} vs center {center.shape}")
    if radius < 0:
        raise InvalidArgumentError(f"radius must be >= 0, got {radius}")
    return np.clip(x, center - radius, center + radius)


def project_to_domain(model: LossModel, x: np.ndarray) -> np.ndarray:
    return project_linf(x, model.center, model.radius_D)


def in_domain(model: LossModel, x: np.ndarray, tolerance: float = DOMAIN_TOLERANCE) -> bool:
    return bool(np.all(np.abs(np.asarray(x) - model.center) <= model.radius_D + tolerance))


def user_avg_gradient(model: LossModel, user: UserRecord, x: np.ndarray) -> np.ndarray:
    """(1/m) sum over the user's samples of grad f(x; z)."""
    if user.samples.shape[0] == 0:
        raise InvalidArgumentError("user has no samples")
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (user.samples.shape[1],):
        raise InvalidArgumentError(f"dimension mismatch: x {x.shape} vs samples {user.samples.shape}")
    return model.gradients(x, user.samples).mean(axis=0)


def batch_avg_gradients(model: LossModel, samples: np.ndarray, x: np.ndarray) -> np.ndarray:
    """User-average gradients for a block of users, samples of shape (B, m, d) -> (B, d)."""
    return model.gradients(x, samples).mean(axis=1)


def diagonally_dominant_hessian(d: int, beta: float, rng: np.random.Generator) -> np.ndarray:
    if d == 1:
        return np.array([[beta]], dtype=np.float64)

    raw = rng.uniform(-1.0, 1.0, size=(d, d))
    off_diagonal = (raw + raw.T) / 2
    np.fill_diagonal(off_diagonal, 0.0)
    diagonal = rng.uniform(0.5, 1.0, size=d)

    # one factor for every off-diagonal entry keeps A symmetric
    row_mass = np.abs(off_diagonal).sum(axis=1)
    ratio = float(np.max(row_mass / diagonal))
    slack = rng.uniform(0.5, 0.9)
    factor = slack / ratio if ratio > 0 else 0.0

    hessian = off_diagonal * factor + np.diag(diagonal)
    return hessian * (beta / np.abs(hessian).sum(axis=1).max())


def _truncated_normal(
    distribution: Distribution, size: Tuple[int, ...], rng: np.random.Generator
) -> np.ndarray:
    shape = size + (distribution.d,)
    mean = distribution.mean_mu
    std = distribution.per_coordinate_std
    bound = distribution.truncation_bound

    if std == 0:
        return np.broadcast_to(np.clip(mean, -bound, bound), shape).copy()
    if math.isinf(bound):
        return rng.normal(mean, std, size=shape)

    lower = (-bound - mean) / std
    upper = (bound - mean) / std
    return stats.truncnorm.rvs(lower, upper, loc=mean, scale=std, size=shape, random_state=rng)


def population_mean(distribution: Distribution) -> np.ndarray:
    """Exact E[z] of the (possibly truncated) per-coordinate normal law."""
    mean = distribution.mean_mu
    std = distribution.per_coordinate_std
    bound = distribution.truncation_bound
    if std == 0:
        return np.clip(mean, -bound, bound)
    if math.isinf(bound):
        return mean.copy()
    return stats.truncnorm.mean((-bound - mean) / std, (bound - mean) / std, loc=mean, scale=std)


def sample_dataset(distribution: Distribution, n: int, m: int, seed: int) -> Dataset:
    if n < 1 or m < 1:
        raise InvalidArgumentError(f"need n, m >= 1, got n={n}, m={m}")
    rng = np.random.default_rng(seed)
    samples = _truncated_normal(distribution, (n, m), rng)
    return Dataset(samples=samples, seed=seed, distribution=distribution)


def sample_user(distribution: Distribution, m: int, rng: np.random.Generator) -> UserRecord:
    if m < 1:
        raise InvalidArgumentError(f"need m >= 1, got {m}")
    return UserRecord(samples=_truncated_normal(distribution, (m,), rng))


def quadratic_lipschitz(d: int, beta: float, radius_D: float) -> float:
    """G = beta * 2D * d bounds every gradient on the domain for samples in [-D, D]^d."""
    return beta * 2 * radius_D * d


def concentrated_noise_std(
    d: int, n: int, m: int, beta: float, radius_D: float = 1.0, spread: float = 0.01
) -> float:
    """Per-sample std that keeps i.i.d. user-average gradients within spread / tau of each other.

    tau is the default scale G * ln(nmd) / sqrt(m). Two user averages differ by
    A (zbar_u - zbar_v), whose l-inf norm is about 2 beta std sqrt(ln(2d) / m).
    """
    tau = quadratic_lipschitz(d, beta, radius_D) * max(math.log(n * m * d), 1.0) / math.sqrt(m)
    return spread * math.sqrt(m) / (2 * tau * beta * math.sqrt(math.log(2 * d)))


def make_quadratic_instance(
    d: int,
    n: int,
    m: int,
    seed: int,
    beta_target: float,
    radius_D: float = 1.0,
    noise_std: Optional[float] = None,
) -> Tuple[LossModel, Dataset]:
    """Quadratic instance centred at the origin with samples inside the domain.

    The hidden optimum is drawn in [-D/2, D/2]^d and samples are truncated to
    [-D, D], so the published G = beta * 2D * d bounds every gradient on the
    domain. One Hessian A is shared by every sample. noise_std=None calibrates
    the sample spread with concentrated_noise_std.
    """
    if min(d, n, m) < 1:
        raise InvalidArgumentError(f"need d, n, m >= 1, got d={d}, n={n}, m={m}")
    if beta_target <= 0 or radius_D <= 0:
        raise InvalidArgumentError("beta_target and radius_D must be > 0")
    if noise_std is None:
        noise_std = concentrated_noise_std(d, n, m, beta_target, radius_D)
    if noise_std < 0:
        raise InvalidArgumentError(f"noise_std must be >= 0, got {noise_std}")

    hessian_seed, sample_seed = np.random.SeedSequence(seed).spawn(2)
    rng = np.random.default_rng(hessian_seed)
    hessian = diagonally_dominant_hessian(d, beta_target, rng)
    hidden = rng.uniform(-radius_D / 2, radius_D / 2, size=d)

    distribution = Distribution(
        kind=DistributionKind.GAUSSIAN_MEAN,
        mean_mu=hidden,
        per_coordinate_std=noise_std,
        truncation_bound=radius_D,
    )
    mean = population_mean(distribution)
    model = LossModel(
        kind=LossKind.QUADRATIC,
        lipschitz_G=quadratic_lipschitz(d, beta_target, radius_D),
        smooth_beta=beta_target,
        radius_D=radius_D,
        center=np.zeros(d),
        optimum=mean,
        hessian=hessian,
        population_mean=mean,
    )
    dataset = sample_dataset(distribution, n, m, seed=int(sample_seed.generate_state(1)[0]))
    logger.debug(
        f"quadratic instance d={d} n={n} m={m} seed={seed} beta={beta_target} "
        f"G={model.lipschitz_G} noise_std={noise_std:.3g}"
    )
    return model, dataset


def hard_instance_bound(m: int, n: int, d: int, truncation_constant: float = 3.0) -> float:
    """G = c * sqrt(m * ln(mnd)), with the log floored at 1."""
    return truncation_constant * math.sqrt(m * max(math.log(m * n * d), 1.0))


def make_linear_hard_instance(
    d: int,
    m: int,
    seed: int,
    n: int = 1,
    truncation_constant: float = 3.0,
    truncate: bool = True,
) -> Distribution:
    if d < 1 or m < 1:
        raise InvalidArgumentError(f"need d, m >= 1, got d={d}, m={m}")
    rng = np.random.default_rng(seed)
    mu = rng.uniform(-1.0, 1.0, size=d)
    bound = hard_instance_bound(m, n, d, truncation_constant) if truncate else math.inf
    return Distribution(
        kind=DistributionKind.LINEAR_HARD_INSTANCE,
        mean_mu=mu,
        per_coordinate_std=math.sqrt(m),
        truncation_bound=bound,
    )


def _sign(values: np.ndarray) -> np.ndarray:
    # sign(0) := +1
    return np.where(np.asarray(values) >= 0, 1.0, -1.0)


def linear_loss_model(distribution: Distribution) -> LossModel:
    """f(x; z) = -<x, z> over [-1, 1]^d for a hard-instance distribution."""
    if distribution.kind != DistributionKind.LINEAR_HARD_INSTANCE:
        raise UnsupportedError(f"no linear loss attached to a {distribution.kind.value} distribution")
    d = distribution.d
    return LossModel(
        kind=LossKind.LINEAR,
        lipschitz_G=distribution.truncation_bound,
        smooth_beta=0.0,
        radius_D=1.0,
        center=np.zeros(d),
        optimum=_sign(distribution.mean_mu),
        population_mean=distribution.mean_mu,
    )


def excess_risk(model: Union[LossModel, Distribution], x: np.ndarray) -> float:
    """F(x) - F(x*) in closed form for the synthetic instances."""
    if isinstance(model, Distribution):
        model = linear_loss_model(model)
    if model.population_mean is None:
        raise UnsupportedError("population risk has no closed form for this model")

    x = np.asarray(x, dtype=np.float64)
    if x.shape != model.center.shape:
        raise InvalidArgumentError(f"dimension mismatch: x {x.shape} vs model d={model.d}")
    if not in_domain(model, x):
        raise InvalidArgumentError("excess risk is defined on the domain only")

    if model.kind == LossKind.LINEAR:
        value = float(np.dot(model.optimum - x, model.population_mean))
    else:
        diff = x - model.optimum
        value = float(0.5 * diff @ model.hessian @ diff)
    return max(value, 0.0)


def weighted_sign_error(mu: np.ndarray, x: np.ndarray) -> float:
    """sum_i |mu_i| * 1(sign(mu_i) != sign(x_i)), with sign(0) = +1."""
    mu = np.asarray(mu, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if mu.shape != x.shape:
        raise InvalidArgumentError(f"dimension mismatch: mu {mu.shape} vs x {x.shape}")
    mismatched = _sign(mu) != _sign(x)
    return float(np.abs(mu)[mismatched].sum())
