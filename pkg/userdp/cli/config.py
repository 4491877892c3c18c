"""Flat key = value experiment configuration.

Precedence: command-line flags > config file > USERDP_* settings > defaults.
"""

from pathlib import Path
from typing import Any, Dict, Mapping, Optional

from pydantic import ValidationError

from ..core.optimizer import default_params, phase_sigma, phase_step_size
from ..core.problem import hard_instance_bound, quadratic_lipschitz
from ..enums import LossKind
from ..errors import UsageError
from ..logging_config import logger, settings
from ..models import DpSgdConfig, PrivacyBudget, RobustStatKind, RunConfig

KNOWN_KEYS = frozenset(RunConfig.model_fields)


def settings_defaults() -> Dict[str, Any]:
    return {
        "seed": settings.seed,
        "noise_std": settings.quadratic_noise_std,
        "beta": settings.quadratic_beta,
        "trim_fraction": settings.trim_fraction,
        "noise_constant": settings.noise_constant,
        "batch_constant": settings.batch_constant,
        "tau_constant": settings.tau_constant,
        "truncation_constant": settings.truncation_constant,
        "insecure_debug": settings.insecure_debug,
        "certify_scale": settings.certify_scale,
    }


def read_config_file(path: Path) -> Dict[str, str]:
    """Parse `key = value` lines; `#` starts a comment, blank lines are skipped."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise UsageError(f"cannot read config file {path}: {e}") from e

    values: Dict[str, str] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise UsageError(f"{path}:{number}: expected 'key = value', got '{raw.strip()}'", key=key or None)
        values[key] = value.strip()
    return values


def parse_assignments(assignments) -> Dict[str, str]:
    values: Dict[str, str] = {}
    for item in assignments or []:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise UsageError(f"expected KEY=VALUE, got '{item}'", key=key.strip() or None)
        values[key.strip()] = value.strip()
    return values


def parse_config(
    config_file: Optional[Path] = None, flags: Optional[Mapping[str, Any]] = None
) -> RunConfig:
    merged: Dict[str, Any] = settings_defaults()
    if config_file is not None:
        merged.update(read_config_file(config_file))
    merged.update({key: value for key, value in (flags or {}).items() if value is not None})

    unknown = sorted(set(merged) - KNOWN_KEYS)
    if unknown:
        raise UsageError(f"unknown configuration key '{unknown[0]}'", key=unknown[0])
    try:
        return RunConfig.model_validate(merged)
    except ValidationError as e:
        error = e.errors()[0]
        key = ".".join(str(part) for part in error["loc"]) or None
        raise UsageError(f"invalid value for '{key}': {error['msg']}", key=key) from e


def lipschitz_bound(cfg: RunConfig) -> float:
    if cfg.loss == LossKind.QUADRATIC:
        return quadratic_lipschitz(cfg.d, cfg.beta, cfg.radius)
    return hard_instance_bound(cfg.m, cfg.n, cfg.d, cfg.truncation_constant)


def build_dpsgd_config(cfg: RunConfig, G: Optional[float] = None) -> DpSgdConfig:
    """default_params for the configured instance, then explicit overrides; every value is logged."""
    G = lipschitz_bound(cfg) if G is None else G
    beta = cfg.beta if cfg.loss == LossKind.QUADRATIC else 0.0
    radius = cfg.radius if cfg.loss == LossKind.QUADRATIC else 1.0
    budget = PrivacyBudget(epsilon=cfg.epsilon, delta=cfg.delta)
    derived = default_params(
        cfg.n,
        cfg.m,
        cfg.d,
        budget,
        G,
        radius,
        beta,
        kind=RobustStatKind(variant=cfg.statistic, trim_fraction=cfg.trim_fraction),
        batch_constant=cfg.batch_constant,
        tau_constant=cfg.tau_constant,
        noise_constant=cfg.noise_constant,
        insecure_debug=cfg.insecure_debug,
        batch_users=cfg.batch_users,
    )

    overrides = {
        name: value
        for name, value in (("eta", cfg.eta), ("tau", cfg.tau), ("upsilon", cfg.upsilon))
        if value is not None
    }
    if cfg.varsigma is not None:
        overrides["varsigma"] = cfg.varsigma
    elif cfg.tau is not None:
        overrides["varsigma"] = 1.0 / cfg.tau
    for name, value in overrides.items():
        logger.info(f"{name} = {value:.6g} (override)")
    result = DpSgdConfig.model_validate({**derived.model_dump(), **overrides})

    sigma = phase_sigma(result, phase_step_size(result.eta, cfg.m, 1), cfg.d)
    logger.info(
        f"sigma_1 = sqrt(d) * {result.noise_constant} * eta_1 / tau * sqrt(2 ln(1.25/delta)) / (eps/2) = {sigma:.6g}"
    )
    return result
