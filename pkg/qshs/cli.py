"""Command-line entry point for qshs."""

from __future__ import annotations

import csv
from contextlib import contextmanager
from dataclasses import asdict
from pathlib import Path
from typing import Iterator, List, Optional

import numpy as np
import typer
from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

from . import evaluation
from .admm import SolverError, fit
from .app_context import AppContext, load_context
from .boundary import DEFAULT_RESOLUTION, BoundaryError, compute_boundary, render_svg, write_boundary_csv
from .config import ConfigError, RunConfig, write_run_config
from .data import DataError, gen_synthetic, inject_noise, load_csv, load_feature_matrix, write_csv
from .evaluation import EvalResult, EvaluationError
from .linsolve import NumericalBreakdownError, SingularSystemError
from .logging import configure_logging, get_logger
from .manifest import RunManifest, start_manifest
from .model import ModelDimensionError, ModelFormatError, decision_values, load, predict_batch, save
from .quadmap import QuadMapError
from .synthetic import surface_kinds

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_SOLVER = 4

USAGE_ERRORS = (ConfigError, ValidationError)
DATA_ERRORS = (
    DataError,
    ModelFormatError,
    ModelDimensionError,
    EvaluationError,
    QuadMapError,
    BoundaryError,
)
SOLVER_ERRORS = (SolverError, SingularSystemError, NumericalBreakdownError)

app = typer.Typer(help="Quadratic-surface SVM with the 0-1 loss: generate, train, evaluate.")
console = Console()


def _bootstrap_logging(
    ctx: typer.Context,
    verbose: bool,
    json_logs: bool,
    log_file: Optional[Path],
    trace_solver: bool = False,
) -> None:
    """Initialise logging once per CLI invocation."""

    if ctx.obj is None:
        ctx.obj = {}

    if ctx.obj.get("_logging_configured"):
        return

    level = "DEBUG" if verbose else "INFO"
    configure_logging(
        level=level, json_output=json_logs, log_file=log_file, trace_solver=trace_solver
    )
    ctx.obj["logger"] = get_logger("qshs.cli")
    ctx.obj["log_level"] = level
    ctx.obj["json_logs"] = json_logs
    ctx.obj["log_file_path"] = log_file
    ctx.obj["trace_solver"] = trace_solver
    ctx.obj["force_log_level"] = verbose
    ctx.obj["_logging_configured"] = True


@app.callback(invoke_without_command=True)
def cli(  # noqa: D401 - Typer generates help text.
    ctx: typer.Context,
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Enable debug logging."),
    json_logs: bool = typer.Option(False, "--json-logs", help="Emit JSON-formatted logs."),
    log_file: Optional[Path] = typer.Option(
        None,
        "--log-file",
        dir_okay=False,
        file_okay=True,
        writable=True,
        resolve_path=True,
        help="Optional file to append structured logs to.",
    ),
    trace_solver: bool = typer.Option(
        False, "--trace-solver", help="Log every ADMM iteration (with --verbose)."
    ),
) -> None:
    """qshs command group."""

    _bootstrap_logging(ctx, verbose, json_logs, log_file, trace_solver)

    if ctx.invoked_subcommand is None:
        typer.echo(ctx.get_help())


def _logger(ctx: typer.Context):
    return (ctx.obj or {}).get("logger", get_logger("qshs.cli"))


def _maybe_update_log_level(ctx: typer.Context, context: AppContext) -> None:
    """Apply ``runtime.log_level`` from a config file unless ``--verbose`` won."""

    obj = ctx.obj or {}
    if obj.get("force_log_level") or context.config_path is None:
        return

    desired = context.config.runtime.log_level.upper()
    if desired != obj.get("log_level"):
        configure_logging(
            level=desired,
            json_output=obj.get("json_logs", False),
            log_file=obj.get("log_file_path"),
            trace_solver=obj.get("trace_solver", False),
        )
        obj["logger"] = get_logger("qshs.cli")
        obj["log_level"] = desired


@contextmanager
def _command_errors(log, command: str) -> Iterator[None]:
    """Map library errors onto exit codes 2 (usage), 3 (data) and 4 (solver)."""

    try:
        yield
    except USAGE_ERRORS as exc:
        log.error(f"{command}.failed", error=str(exc), kind="usage")
        typer.echo(f"Error: {exc}", err=True)
        raise typer.Exit(code=EXIT_USAGE) from exc
    except DATA_ERRORS as exc:
        log.error(f"{command}.failed", error=str(exc), kind="data")
        typer.echo(f"Error: {exc}", err=True)
        raise typer.Exit(code=EXIT_DATA) from exc
    except SOLVER_ERRORS as exc:
        log.error(f"{command}.failed", error=str(exc), kind="solver")
        typer.echo(f"Solver error: {exc}", err=True)
        raise typer.Exit(code=EXIT_SOLVER) from exc


def _context(ctx: typer.Context, config: Optional[Path]) -> AppContext:
    context = load_context(config)
    _maybe_update_log_level(ctx, context)
    return context


def _parse_kind(value: str) -> str:
    kinds = surface_kinds()
    if value not in kinds:
        raise typer.BadParameter(f"Unknown kind '{value}'; choose from {', '.join(kinds)}.")
    return value


def _positive_margin(value: float) -> float:
    if not value > 0.0:
        raise typer.BadParameter(f"Margin must be positive, got {value}.")
    return value


def _parse_float_list(value: Optional[str]) -> Optional[List[float]]:
    if value is None:
        return None
    try:
        values = [float(item) for item in value.split(",") if item.strip()]
    except ValueError as exc:
        raise typer.BadParameter(f"Expected comma-separated numbers, got '{value}'.") from exc
    if not values:
        raise typer.BadParameter("Provide at least one value.")
    return values


CONFIG_OPTION = typer.Option(
    None,
    "--config",
    exists=True,
    dir_okay=False,
    resolve_path=True,
    help="Run configuration YAML (see `qshs init`).",
)


@app.command()
def init(
    ctx: typer.Context,
    path: Path = typer.Option(Path("qshs.yml"), "--path", help="Where to write the configuration."),
    force: bool = typer.Option(False, "--force", help="Overwrite an existing file."),
) -> None:
    """Write a run configuration populated with the default protocol."""

    log = _logger(ctx)

    if path.exists() and not force:
        typer.echo(f"Configuration already exists at: {path}")
        typer.echo("Use --force to regenerate with default values.")
        return

    write_run_config(path, RunConfig())
    typer.echo(f"Configuration written to: {path}")
    log.info("init.completed", path=str(path), force=force)


@app.command()
def gen(
    ctx: typer.Context,
    kind: str = typer.Option(
        ..., "--kind", callback=_parse_kind, help="line, parabola, circle or hyperbola."
    ),
    n: int = typer.Option(300, "--n", min=4, help="Number of samples."),
    margin: float = typer.Option(
        0.1, "--margin", callback=_positive_margin, help="Separation margin (> 0)."
    ),
    seed: int = typer.Option(0, "--seed", min=0, help="Random seed."),
    flips: int = typer.Option(0, "--flips", min=0, help="Labels to flip."),
    outliers: int = typer.Option(0, "--outliers", min=0, help="Outliers to append."),
    out: Path = typer.Option(..., "--out", dir_okay=False, help="Destination CSV."),
) -> None:
    """Generate a synthetic 2-D dataset separated by a canonical quadratic."""

    log = _logger(ctx)
    params = {"kind": kind, "n": n, "margin": margin, "flips": flips, "outliers": outliers}
    manifest = start_manifest(out, "gen", params, seed=seed)

    with _command_errors(log, "gen"):
        dataset = gen_synthetic(kind, n, margin=margin, seed=seed)
        dataset = inject_noise(dataset, label_flips=flips, outliers=outliers, seed=seed)
        write_csv(dataset, out)

    manifest.record_artifact("dataset", out)
    manifest.complete(
        details={
            "rows": dataset.n_samples,
            "flipped_indices": dataset.metadata.get("flipped_indices", []),
            "outlier_indices": dataset.metadata.get("outlier_indices", []),
        }
    )
    manifest.save()
    typer.echo(f"Wrote {dataset.n_samples} rows to {out}")
    log.info("gen.completed", kind=kind, rows=dataset.n_samples, out=str(out))


def _report_table(title: str, rows: List[tuple]) -> Table:
    table = Table(title=title)
    table.add_column("Field")
    table.add_column("Value")
    for key, value in rows:
        table.add_row(key, value)
    return table


@app.command()
def train(
    ctx: typer.Context,
    data: Path = typer.Option(..., "--data", exists=True, dir_okay=False, help="Training CSV."),
    C: Optional[float] = typer.Option(None, "--C", help="0-1 loss penalty."),
    sigma: Optional[float] = typer.Option(None, "--sigma", help="Augmented Lagrangian penalty."),
    eta: Optional[float] = typer.Option(None, "--eta", help="Dual step size (default 1.618)."),
    max_iter: Optional[int] = typer.Option(None, "--max-iter", help="Iteration cap (default 1000)."),
    tol: Optional[float] = typer.Option(None, "--tol", help="Stopping tolerance (default 1e-3)."),
    linear_solver: Optional[str] = typer.Option(
        None, "--linear-solver", help="auto, direct or cg for the [w; b] subproblem."
    ),
    offset_step: Optional[str] = typer.Option(
        None, "--offset-step", help="working_set (default) or full averaging for the offset c."
    ),
    record_history: bool = typer.Option(False, "--history", help="Keep per-iteration records."),
    out: Path = typer.Option(Path("model.json"), "--out", dir_okay=False, help="Model file."),
    config: Optional[Path] = CONFIG_OPTION,
) -> None:
    """Fit a quadratic-surface classifier and save it."""

    log = _logger(ctx)

    with _command_errors(log, "train"):
        context = _context(ctx, config)
        solver = context.solver(
            C=C,
            sigma=sigma,
            eta=eta,
            max_iter=max_iter,
            tol=tol,
            linear_solver=linear_solver,
            offset_step=offset_step,
            record_history=record_history or None,
        )
        manifest = start_manifest(out, "train", context.provenance(solver=solver))
        manifest.record_input("data", data)

        dataset = load_csv(data, context.csv)
        model, report = fit(dataset, solver, logger=log.bind(dataset=dataset.name))
        train_acc = evaluation.accuracy(predict_batch(model, dataset.X), dataset.y)
        save(model, out)

    rows = [
        ("dataset", dataset.name),
        ("converged", str(report.converged).lower()),
        ("iterations", str(report.iterations)),
        *((name, f"{value:.3e}") for name, value in report.residuals.as_dict().items()),
        ("objective", f"{report.objective:.6g}"),
        ("NSV", str(evaluation.nsv(report))),
        ("train ACC", f"{train_acc:.4f}"),
        ("model", str(out)),
    ]
    console.print(_report_table("Training report", rows))
    if not report.converged:
        typer.echo(f"Warning: not converged after {report.iterations} iterations (converged=false)")

    details = {**report.summary(), "train_accuracy": train_acc}
    if report.history:
        details["history"] = [asdict(record) for record in report.history]
    manifest.record_artifact("model", out)
    manifest.complete(details=details)
    manifest.save()
    log.info(
        "train.completed",
        converged=report.converged,
        iterations=report.iterations,
        nsv=evaluation.nsv(report),
        train_accuracy=train_acc,
    )


@app.command()
def predict(
    ctx: typer.Context,
    model_path: Path = typer.Option(..., "--model", exists=True, dir_okay=False, help="Model file."),
    data: Path = typer.Option(..., "--data", exists=True, dir_okay=False, help="Input CSV."),
    out: Path = typer.Option(..., "--out", dir_okay=False, help="Predictions CSV."),
    config: Optional[Path] = CONFIG_OPTION,
) -> None:
    """Write ``label,decision_value`` for every input row."""

    log = _logger(ctx)

    with _command_errors(log, "predict"):
        context = _context(ctx, config)
        manifest = start_manifest(out, "predict", context.provenance())
        manifest.record_input("model", model_path)
        manifest.record_input("data", data)

        model = load(model_path)
        X, y = load_feature_matrix(data, model.n_features, context.csv)
        values = decision_values(model, X)
        labels = predict_batch(model, X)

    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["label", "decision_value"])
        for label, value in zip(labels, values):
            writer.writerow([str(int(label)), repr(float(value))])

    details = {"rows": int(labels.size)}
    if y is not None and y.size:
        details["accuracy"] = evaluation.accuracy(labels, y)
        typer.echo(f"Accuracy against file labels: {details['accuracy']:.4f}")
    typer.echo(f"Wrote {labels.size} predictions to {out}")

    manifest.record_artifact("predictions", out)
    manifest.complete(details=details)
    manifest.save()
    log.info("predict.completed", **details)


def _results_table(title: str, results: List[EvalResult], best: Optional[EvalResult] = None) -> Table:
    table = Table(title=title)
    for column in ("C", "sigma", "mACC", "stdACC", "mNSV", "stdNSV", "cpu_s"):
        table.add_column(column, justify="right")
    for result in results:
        marker = "[bold]" if result is best else ""
        table.add_row(
            f"{marker}{result.C:g}",
            f"{result.sigma:.4g}",
            f"{result.mean_acc:.4f}",
            f"{result.std_acc:.4f}",
            f"{result.mean_nsv:.2f}",
            f"{result.std_nsv:.2f}",
            f"{result.cpu_seconds:.3f}",
        )
    return table


def _eval_manifest(
    out: Optional[Path], data: Path, command: str, params: dict, seed: int
) -> RunManifest:
    """Manifest next to ``--out``, or a command-tagged sidecar of the dataset."""

    if out is not None:
        return start_manifest(out, command, params, seed=seed)
    return start_manifest(data, command, params, seed=seed, tag=command)


def _finish_results(
    manifest: RunManifest,
    results: List[EvalResult],
    out: Optional[Path],
    details: dict,
) -> None:
    if out is not None:
        evaluation.export_results(results, out)
        typer.echo(f"Results written to {out}")
        manifest.record_artifact("results", out)
    manifest.complete(details=details)
    manifest.save()


@app.command()
def cv(
    ctx: typer.Context,
    data: Path = typer.Option(..., "--data", exists=True, dir_okay=False, help="Dataset CSV."),
    folds: Optional[int] = typer.Option(None, "--folds", min=2, help="Folds per repeat (default 10)."),
    repeats: Optional[int] = typer.Option(None, "--repeats", min=1, help="Repeats (default 10)."),
    seed: Optional[int] = typer.Option(None, "--seed", min=0, help="Shuffle seed."),
    C: Optional[float] = typer.Option(None, "--C", help="0-1 loss penalty."),
    sigma: Optional[float] = typer.Option(None, "--sigma", help="Augmented Lagrangian penalty."),
    out: Optional[Path] = typer.Option(None, "--out", dir_okay=False, help="Results .csv or .json."),
    config: Optional[Path] = CONFIG_OPTION,
) -> None:
    """Repeated stratified k-fold cross-validation of one (C, sigma) cell."""

    log = _logger(ctx)

    with _command_errors(log, "cv"):
        context = _context(ctx, config)
        plan = context.cv_plan(folds=folds, repeats=repeats, seed=seed)
        solver = context.solver(C=C, sigma=sigma)
        params = context.provenance(cv=plan, solver=solver)
        manifest = _eval_manifest(out, data, "cv", params, plan.seed)
        manifest.record_input("data", data)

        dataset = load_csv(data, context.csv)
        result = evaluation.cross_validate(
            dataset, plan, solver, threads=context.threads, logger=log
        )
        console.print(_results_table(f"Cross-validation: {dataset.name}", [result]))
        _finish_results(manifest, [result], out, result.as_row())


@app.command()
def grid(
    ctx: typer.Context,
    data: Path = typer.Option(..., "--data", exists=True, dir_okay=False, help="Dataset CSV."),
    folds: Optional[int] = typer.Option(None, "--folds", min=2, help="Folds per repeat (default 10)."),
    repeats: Optional[int] = typer.Option(None, "--repeats", min=1, help="Repeats (default 10)."),
    seed: Optional[int] = typer.Option(None, "--seed", min=0, help="Shuffle seed."),
    grid_c: Optional[str] = typer.Option(None, "--grid-C", help="Comma-separated C values."),
    grid_sigma: Optional[str] = typer.Option(None, "--grid-sigma", help="Comma-separated sigma values."),
    out: Optional[Path] = typer.Option(None, "--out", dir_okay=False, help="Results .csv or .json."),
    config: Optional[Path] = CONFIG_OPTION,
) -> None:
    """Cross-validate every (C, sigma) cell and report the best one."""

    log = _logger(ctx)
    C_values = _parse_float_list(grid_c)
    sigma_values = _parse_float_list(grid_sigma)

    with _command_errors(log, "grid"):
        context = _context(ctx, config)
        plan = context.cv_plan(folds=folds, repeats=repeats, seed=seed)
        spec = context.grid(C_values=C_values, sigma_values=sigma_values)
        solver = context.solver()
        params = context.provenance(cv=plan, grid=spec, solver=solver)
        manifest = _eval_manifest(out, data, "grid", params, plan.seed)
        manifest.record_input("data", data)

        dataset = load_csv(data, context.csv)
        result = evaluation.grid_search(
            dataset, spec, plan, solver, threads=context.threads, logger=log
        )
        best = result.best
        console.print(_results_table(f"Grid search: {dataset.name}", result.table, best=best))
        typer.echo(
            f"Best cell: C={result.best_C:g}, sigma={result.best_sigma:.4g} "
            f"(mACC={best.mean_acc:.4f}, mNSV={best.mean_nsv:.2f})"
        )
        _finish_results(manifest, result.table, out, best.as_row())


@app.command()
def boundary(
    ctx: typer.Context,
    model_path: Path = typer.Option(..., "--model", exists=True, dir_okay=False, help="Model file."),
    data: Optional[Path] = typer.Option(
        None, "--data", exists=True, dir_okay=False, help="Samples to overlay."
    ),
    out: Path = typer.Option(..., "--out", dir_okay=False, help="Plot-data CSV."),
    svg: Optional[Path] = typer.Option(None, "--svg", dir_okay=False, help="Optional SVG rendering."),
    resolution: int = typer.Option(
        DEFAULT_RESOLUTION, "--resolution", min=2, help="Grid points per axis."
    ),
    config: Optional[Path] = CONFIG_OPTION,
) -> None:
    """Export the zero level set of a 2-feature model plus sample and SV markers."""

    log = _logger(ctx)

    with _command_errors(log, "boundary"):
        context = _context(ctx, config)
        params = {**context.provenance(), "resolution": resolution}
        manifest = start_manifest(out, "boundary", params)
        manifest.record_input("model", model_path)
        model = load(model_path)
        dataset = None
        if data is not None:
            manifest.record_input("data", data)
            dataset = load_csv(data, context.csv)

        result = compute_boundary(model, dataset, resolution=resolution)
        write_boundary_csv(result, out)
        manifest.record_artifact("plot_data", out)
        if svg is not None:
            render_svg(result, svg, title=model.meta.get("dataset"))
            manifest.record_artifact("svg", svg)

    details = {
        "level_points": int(result.level_points.shape[0]),
        "support_vectors": int(np.count_nonzero(result.support)),
        "cell_bound": result.cell_bound,
    }
    manifest.complete(details=details)
    manifest.save()
    typer.echo(f"Wrote {details['level_points']} level-set points to {out}")
    log.info("boundary.completed", **details)


def main() -> None:
    """Run the Typer application."""

    app()


if __name__ == "__main__":  # pragma: no cover - direct execution convenience
    main()
