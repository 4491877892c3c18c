import json
from pathlib import Path
from typing import Annotated, Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import typer
from pydantic import ValidationError

from ..core.certify import run_certification
from ..core.harness import (
    coordinate_median_shift,
    counterexample_geometric_median,
    make_instance,
    measure_iteration_sensitivity,
    neighboring_pair,
    run_pipeline,
    run_utility_experiment,
)
from ..core.optimizer import run_localization, sgd_trajectory
from ..core.problem import excess_risk
from ..enums import Alignment, OutputFormat, Pipeline, Subcommand
from ..errors import (
    ConstructionError,
    InfeasibleConfigurationError,
    InvalidArgumentError,
    UnsupportedError,
    UsageError,
    UserDPError,
)
from ..logging_config import logger, settings
from ..models import Dataset, LossModel, NeighborSpec, PrivacyBudget, RobustStatKind, RunConfig, UtilityRecord
from ..repositories import (
    CERTIFICATION_SCHEMA,
    TRAJECTORY_SCHEMA,
    UTILITY_RECORD_SCHEMA,
    UTILITY_SCHEMA,
    CsvRepository,
    DatasetRepository,
    certification_rows,
    trajectory_rows,
    utility_record_rows,
    utility_rows,
    write_vega_lite,
)
from .config import parse_assignments, parse_config, build_dpsgd_config

EXIT_OK = 0
EXIT_INVARIANT = 1
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3

app = typer.Typer(help="User-level DP stochastic convex optimization experiments.", no_args_is_help=True)

ConfigOption = Annotated[Optional[Path], typer.Option("--config", "-c", help="flat key = value config file")]
SetOption = Annotated[Optional[List[str]], typer.Option("--set", "-s", help="KEY=VALUE override, repeatable")]
SeedOption = Annotated[Optional[int], typer.Option(help="root seed")]
OutputOption = Annotated[Optional[Path], typer.Option("--output", "-o", help="output file")]
FormatOption = Annotated[Optional[OutputFormat], typer.Option("--format", help="csv or json")]
EpsilonOption = Annotated[Optional[float], typer.Option(help="privacy epsilon")]
DeltaOption = Annotated[Optional[float], typer.Option(help="privacy delta")]
PipelineOption = Annotated[Optional[Pipeline], typer.Option(help="pipeline to run")]


def _provenance(error: BaseException) -> str:
    """Module of the innermost frame that raised."""
    traceback = error.__traceback__
    module = "userdp"
    while traceback is not None:
        module = traceback.tb_frame.f_globals.get("__name__", module)
        traceback = traceback.tb_next
    return module


def exit_code(error: BaseException) -> int:
    if isinstance(error, (InfeasibleConfigurationError, ConstructionError)):
        return EXIT_INFEASIBLE
    if isinstance(error, (UsageError, InvalidArgumentError, UnsupportedError, ValidationError)):
        return EXIT_USAGE
    return EXIT_INVARIANT


def _output(cfg: RunConfig, suffix: Optional[str] = None) -> Path:
    if cfg.output is not None:
        return cfg.output
    return Path(settings.output_dir) / f"{cfg.subcommand.value}.{suffix or cfg.format.value}"


def _write_json(path: Path, payload: Any) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.info(f"results written to {path}")
    return path


def _budget(cfg: RunConfig) -> PrivacyBudget:
    return PrivacyBudget(epsilon=cfg.epsilon, delta=cfg.delta)


def _kind(cfg: RunConfig) -> RobustStatKind:
    return RobustStatKind(variant=cfg.statistic, trim_fraction=cfg.trim_fraction)


def _instance(cfg: RunConfig) -> Tuple[LossModel, Dataset]:
    model, dataset = make_instance(
        cfg.loss, cfg.d, cfg.n, cfg.m, cfg.seed, cfg.beta, cfg.noise_std, cfg.truncation_constant, cfg.radius
    )
    if cfg.dataset is None:
        return model, dataset

    try:
        loaded = DatasetRepository(cfg.dataset).load()
    except OSError as e:
        raise UsageError(f"cannot read dataset file {cfg.dataset}: {e}", key="dataset") from e
    # the loss model is rebuilt from the config, so the file must come from the same instance
    if loaded.samples.shape != dataset.samples.shape or loaded.distribution is None:
        raise UsageError(
            f"{cfg.dataset} holds {loaded.samples.shape} samples, the configured instance needs "
            f"{dataset.samples.shape} with a recorded distribution",
            key="dataset",
        )
    if loaded.distribution.model_dump_json() != dataset.distribution.model_dump_json():
        raise UsageError(f"{cfg.dataset} was drawn from a different distribution", key="dataset")
    logger.info(f"replaying dataset {cfg.dataset}")
    return model, loaded


def _save_dataset(cfg: RunConfig, dataset: Dataset) -> None:
    if cfg.save_dataset:
        DatasetRepository(_output(cfg).with_suffix(".dataset.txt")).create(dataset)


def _mechanism_rng(cfg: RunConfig) -> np.random.Generator:
    return np.random.default_rng([cfg.seed, cfg.n, cfg.m])


def _run(cfg: RunConfig) -> int:
    model, dataset = _instance(cfg)
    _save_dataset(cfg, dataset)
    rng = _mechanism_rng(cfg)
    path = _output(cfg)

    if cfg.pipeline == Pipeline.ROBUST:
        dp_cfg = build_dpsgd_config(cfg, model.lipschitz_G)
        result = run_localization(dataset, model, dp_cfg, model.center, rng)
        risk = excess_risk(model, result.point)
        passed = all(log.passed for log in result.phases)
        if cfg.format == OutputFormat.JSON:
            _write_json(path, {"excess_risk": risk, "passed": passed, **result.model_dump(mode="json")})
        else:
            rows = []
            for log in result.phases:
                rows.extend(trajectory_rows(log, excess_risks=[excess_risk(model, x) for x in log.iterates]))
            CsvRepository(path, TRAJECTORY_SCHEMA).create(rows)
    else:
        point, passed = run_pipeline(
            cfg.pipeline,
            model,
            dataset,
            _budget(cfg),
            rng,
            kind=_kind(cfg),
            batch_constant=cfg.batch_constant,
            tau_constant=cfg.tau_constant,
            noise_constant=cfg.noise_constant,
            insecure_debug=cfg.insecure_debug,
            batch_users=cfg.batch_users,
        )
        risk = excess_risk(model, point)
        record = UtilityRecord(
            n=cfg.n, m=cfg.m, d=cfg.d, seed=cfg.seed, pipeline=cfg.pipeline, excess_risk=risk, passed=passed
        )
        if cfg.format == OutputFormat.JSON:
            _write_json(path, record.model_dump(mode="json"))
        else:
            CsvRepository(path, UTILITY_RECORD_SCHEMA).create(utility_record_rows([record]))

    typer.echo(f"pipeline={cfg.pipeline.value} excess_risk={risk:.6g} passed={passed}")
    return EXIT_OK


def _sensitivity(cfg: RunConfig) -> int:
    model, dataset = _instance(cfg)
    _save_dataset(cfg, dataset)
    dp_cfg = build_dpsgd_config(cfg, model.lipschitz_G)
    rng = _mechanism_rng(cfg)
    spec = NeighborSpec(swap_user_index=cfg.swap_user_index, alignment=cfg.alignment)
    pair = neighboring_pair(dataset, spec, rng, model=model, cfg=dp_cfg)
    report = measure_iteration_sensitivity(model, pair, dp_cfg, rng)

    path = _output(cfg)
    if cfg.format == OutputFormat.JSON:
        _write_json(path, report.model_dump(mode="json"))
    else:
        log = sgd_trajectory(pair[0], model, dp_cfg, model.center)
        CsvRepository(path, TRAJECTORY_SCHEMA).create(trajectory_rows(log, linf_gaps=report.per_step_linf_gap))

    gaps = report.per_step_linf_gap
    typer.echo(
        f"step-1 gap {gaps[0]:.6g} (bound {report.base_gap_bound:.6g}), "
        f"max later gap {max(gaps[1:], default=0.0):.6g}, "
        f"max score gap {max(report.score_gaps):.6g} (bound {report.score_gap_bound:.6g})"
    )
    if report.violated:
        logger.error("sensitivity bound violated")
        return EXIT_INVARIANT
    return EXIT_OK


def _sweep(cfg: RunConfig) -> int:
    path = _output(cfg)
    seeds = list(range(cfg.seed, cfg.seed + cfg.seeds))
    repository = CsvRepository(path, UTILITY_SCHEMA)
    records, summaries = [], []
    try:
        for point in cfg.grid:
            point_records, point_summaries = run_utility_experiment(
                [point],
                cfg.d,
                _budget(cfg),
                seeds,
                cfg.pipeline,
                loss=cfg.loss,
                beta=cfg.beta,
                noise_std=cfg.noise_std,
                kind=_kind(cfg),
                batch_constant=cfg.batch_constant,
                tau_constant=cfg.tau_constant,
                noise_constant=cfg.noise_constant,
                truncation_constant=cfg.truncation_constant,
                insecure_debug=cfg.insecure_debug,
                batch_users=cfg.batch_users,
            )
            records.extend(point_records)
            summaries.extend(point_summaries)
    except Exception as e:
        if cfg.format == OutputFormat.CSV:
            repository.create_failed(utility_rows(summaries), f"{_provenance(e)}: {e}")
        raise

    if cfg.format == OutputFormat.JSON:
        _write_json(
            path,
            {
                "records": [r.model_dump(mode="json") for r in records],
                "summaries": [s.model_dump(mode="json") for s in summaries],
            },
        )
    else:
        repository.create(utility_rows(summaries))
        CsvRepository(path.with_suffix(".records.csv"), UTILITY_RECORD_SCHEMA).create(utility_record_rows(records))
        write_vega_lite(path.with_suffix(".vl.json"), summaries)

    for s in summaries:
        mean = "n/a" if s.mean is None else f"{s.mean:.6g} +- {s.stderr:.2g}"
        typer.echo(f"n={s.n} m={s.m} {s.pipeline.value}: {mean} ({s.count} ok, {s.failures} failed)")
    return EXIT_OK


def _counterexample(cfg: RunConfig) -> int:
    first, second, distance = counterexample_geometric_median(cfg.alpha)
    typer.echo(f"geometric median of P : ({first[0]:.6g}, {first[1]:.6g})")
    typer.echo(f"geometric median of P': ({second[0]:.6g}, {second[1]:.6g})")
    typer.echo(f"l2 distance: {distance:.6g}")
    typer.echo(f"coordinate-wise median shift (l-inf): {coordinate_median_shift(cfg.alpha):.6g}")
    return EXIT_OK


def _certify(cfg: RunConfig) -> int:
    path = _output(cfg)
    try:
        report = run_certification(cfg.certify_scale, cfg.seed)
    except Exception as e:
        if cfg.format == OutputFormat.CSV:
            CsvRepository(path, CERTIFICATION_SCHEMA).create_failed([], f"{_provenance(e)}: {e}")
        raise

    if cfg.format == OutputFormat.JSON:
        _write_json(path, {"passed": report.passed, **report.model_dump(mode="json")})
    else:
        CsvRepository(path, CERTIFICATION_SCHEMA).create(certification_rows(report))
    for check in report.checks:
        typer.echo(f"{'ok  ' if check.passed else 'FAIL'} {check.name}: {check.violations}/{check.trials} {check.detail}")
    return EXIT_OK if report.passed else EXIT_INVARIANT


HANDLERS: Dict[Subcommand, Callable[[RunConfig], int]] = {
    Subcommand.RUN: _run,
    Subcommand.SENSITIVITY: _sensitivity,
    Subcommand.SWEEP: _sweep,
    Subcommand.COUNTEREXAMPLE: _counterexample,
    Subcommand.CERTIFY: _certify,
}


def run_experiment(cfg: RunConfig) -> int:
    """Dispatch one subcommand; returns its exit status instead of raising."""
    try:
        return HANDLERS[cfg.subcommand](cfg)
    except (UserDPError, ValidationError) as e:
        logger.error(f"[{_provenance(e)}] {e}")
        return exit_code(e)


def _invoke(subcommand: Subcommand, config: Optional[Path], assignments: Optional[List[str]], **flags) -> None:
    try:
        merged: Dict[str, Any] = parse_assignments(assignments)
        merged.update({key: value for key, value in flags.items() if value is not None})
        merged["subcommand"] = subcommand
        cfg = parse_config(config, merged)
    except UserDPError as e:
        logger.error(f"[{_provenance(e)}] {e}")
        raise typer.Exit(exit_code(e))
    status = run_experiment(cfg)
    if status != EXIT_OK:
        raise typer.Exit(status)


@app.command()
def run(
    config: ConfigOption = None,
    assignments: SetOption = None,
    seed: SeedOption = None,
    epsilon: EpsilonOption = None,
    delta: DeltaOption = None,
    pipeline: PipelineOption = None,
    output: OutputOption = None,
    output_format: FormatOption = None,
):
    """Run one pipeline on one synthetic instance and report its excess risk."""
    _invoke(
        Subcommand.RUN, config, assignments,
        seed=seed, epsilon=epsilon, delta=delta, pipeline=pipeline, output=output, format=output_format,
    )


@app.command()
def sensitivity(
    config: ConfigOption = None,
    assignments: SetOption = None,
    seed: SeedOption = None,
    alignment: Annotated[Optional[Alignment], typer.Option(help="neighbor construction")] = None,
    swap: Annotated[Optional[int], typer.Option(help="index of the swapped user, within the first block")] = None,
    output: OutputOption = None,
    output_format: FormatOption = None,
):
    """Coupled noiseless trajectories on a neighboring pair; exit 1 if a bound is exceeded."""
    _invoke(
        Subcommand.SENSITIVITY, config, assignments,
        seed=seed, alignment=alignment, swap_user_index=swap, output=output, format=output_format,
    )


@app.command()
def sweep(
    config: ConfigOption = None,
    assignments: SetOption = None,
    seed: SeedOption = None,
    grid: Annotated[Optional[str], typer.Option(help='grid points, e.g. "1024x16,2048x16"')] = None,
    seeds: Annotated[Optional[int], typer.Option(help="seeds per grid point")] = None,
    pipeline: PipelineOption = None,
    epsilon: EpsilonOption = None,
    delta: DeltaOption = None,
    output: OutputOption = None,
    output_format: FormatOption = None,
):
    """Mean excess risk per grid point, plus a Vega-Lite descriptor next to the CSV."""
    _invoke(
        Subcommand.SWEEP, config, assignments,
        seed=seed, grid=grid, seeds=seeds, pipeline=pipeline, epsilon=epsilon, delta=delta,
        output=output, format=output_format,
    )


@app.command()
def counterexample(
    alpha: Annotated[Optional[float], typer.Option(help="perturbation size, 0 < alpha <= 0.1")] = None,
    config: ConfigOption = None,
    assignments: SetOption = None,
):
    """Geometric median of two alpha-close point sets, against the coordinate-wise median."""
    _invoke(Subcommand.COUNTEREXAMPLE, config, assignments, alpha=alpha)


@app.command()
def certify(
    config: ConfigOption = None,
    assignments: SetOption = None,
    seed: SeedOption = None,
    scale: Annotated[Optional[float], typer.Option(help="multiplier on every trial count")] = None,
    output: OutputOption = None,
    output_format: FormatOption = None,
):
    """Run the full randomized lemma suite; exit 1 on any violation."""
    _invoke(
        Subcommand.CERTIFY, config, assignments,
        seed=seed, certify_scale=scale, output=output, format=output_format,
    )


if __name__ == "__main__":
    app()
