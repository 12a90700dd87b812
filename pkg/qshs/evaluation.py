"""Cross-validation, grid search, result tables and rank statistics."""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import structlog
from scipy.stats import rankdata
from sklearn.metrics import accuracy_score
from sklearn.model_selection import LeaveOneOut, StratifiedKFold

from .admm import FitReport, SolverError, fit
from .config import CvPlan, GridSpec, SolverConfig
from .data import Dataset
from .logging import get_logger
from .model import predict_batch

METHOD_NAME = "qssvm01"
RESULT_COLUMNS = ("dataset", "method", "mACC", "stdACC", "mNSV", "stdNSV", "cpu_s", "C", "sigma")


class EvaluationError(RuntimeError):
    """Raised for invalid evaluation plans, tables or statistic inputs."""


@dataclass(frozen=True)
class FoldResult:
    repeat: int
    fold: int
    accuracy: float
    nsv: int
    seconds: float
    converged: bool
    iterations: int


@dataclass(frozen=True)
class EvalResult:
    """Aggregate of every fold-test of one ``(C, sigma)`` cell."""

    dataset: str
    C: float
    sigma: float
    mean_acc: float
    std_acc: float
    mean_nsv: float
    std_nsv: float
    cpu_seconds: float
    folds: Tuple[FoldResult, ...] = field(default=(), repr=False)

    @property
    def converged_fraction(self) -> float:
        if not self.folds:
            return 0.0
        return sum(fold.converged for fold in self.folds) / len(self.folds)

    def as_row(self) -> Dict[str, Any]:
        return {
            "dataset": self.dataset,
            "method": METHOD_NAME,
            "mACC": self.mean_acc,
            "stdACC": self.std_acc,
            "mNSV": self.mean_nsv,
            "stdNSV": self.std_nsv,
            "cpu_s": self.cpu_seconds,
            "C": self.C,
            "sigma": self.sigma,
        }


class GridSearchResult(NamedTuple):
    best_C: float
    best_sigma: float
    table: List[EvalResult]

    @property
    def best(self) -> EvalResult:
        for result in self.table:
            if result.C == self.best_C and result.sigma == self.best_sigma:
                return result
        raise LookupError("best cell missing from table")


# ----------------------------------------------------------------------
# Metrics
# ----------------------------------------------------------------------
def accuracy(pred, truth) -> float:
    """Fraction of positions where ``pred`` and ``truth`` agree."""

    predicted = np.asarray(pred).ravel()
    expected = np.asarray(truth).ravel()
    if predicted.size != expected.size:
        raise EvaluationError(
            f"Prediction length {predicted.size} does not match label length {expected.size}"
        )
    if predicted.size == 0:
        raise EvaluationError("accuracy needs at least one sample")
    return float(accuracy_score(expected, predicted))


def nsv(report: FitReport) -> int:
    """Support-vector count: multipliers that are exactly nonzero."""

    return int(np.count_nonzero(report.lam))


# ----------------------------------------------------------------------
# Fold construction
# ----------------------------------------------------------------------
def check_plan(data: Dataset, plan: CvPlan) -> None:
    if plan.folds > data.n_samples:
        raise EvaluationError(
            f"{plan.folds} folds requested but dataset '{data.name}' has {data.n_samples} samples"
        )
    for label in (-1.0, 1.0):
        count = int(np.count_nonzero(data.y == label))
        if count < 2:
            raise EvaluationError(
                f"Class {int(label):+d} of dataset '{data.name}' has {count} samples; "
                "at least 2 are needed to stratify"
            )
        if plan.folds < data.n_samples and count < plan.folds:
            raise EvaluationError(
                f"Class {int(label):+d} of dataset '{data.name}' has {count} samples; "
                f"cannot stratify into {plan.folds} folds"
            )


def stratified_folds(y: np.ndarray, folds: int, seed: int) -> List[np.ndarray]:
    """Test-index sets of one shuffled stratified ``folds``-way split.

    ``folds == len(y)`` is leave-one-out, which no stratified split can
    express once a class has fewer than ``folds`` members.
    """

    labels = np.asarray(y)
    placeholder = np.zeros((labels.size, 1))
    if folds == labels.size:
        splitter = LeaveOneOut()
    else:
        splitter = StratifiedKFold(n_splits=folds, shuffle=True, random_state=seed)
    return [np.sort(test) for _, test in splitter.split(placeholder, labels)]


# ----------------------------------------------------------------------
# Cross-validation
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class _FoldTask:
    cell: int
    repeat: int
    fold: int
    train: np.ndarray
    test: np.ndarray


def _split_tasks(data: Dataset, plan: CvPlan, n_cells: int) -> List[_FoldTask]:
    # One independent shuffle per repeat, all derived from the plan seed.
    seeds = np.random.SeedSequence(plan.seed).generate_state(plan.repeats)
    partitions = [stratified_folds(data.y, plan.folds, int(seed)) for seed in seeds]
    tasks: List[_FoldTask] = []
    all_indices = np.arange(data.n_samples)
    for cell in range(n_cells):
        for repeat, folds in enumerate(partitions):
            for fold, test in enumerate(folds):
                train = np.setdiff1d(all_indices, test, assume_unique=True)
                tasks.append(_FoldTask(cell, repeat, fold, train, test))
    return tasks


def _run_fold(data: Dataset, task: _FoldTask, cfg: SolverConfig) -> FoldResult:
    train = data.subset(task.train, name=f"{data.name}[train]")
    test = data.subset(task.test, name=f"{data.name}[test]")

    started = time.perf_counter()
    log = get_logger("qshs.admm").bind(dataset=data.name, repeat=task.repeat, fold=task.fold)
    model, report = fit(train, cfg, logger=log)
    predicted = predict_batch(model, test.X)
    seconds = time.perf_counter() - started

    return FoldResult(
        repeat=task.repeat,
        fold=task.fold,
        accuracy=accuracy(predicted, test.y),
        nsv=nsv(report),
        seconds=seconds,
        converged=report.converged,
        iterations=report.iterations,
    )


def _aggregate(data: Dataset, cfg: SolverConfig, folds: Sequence[FoldResult]) -> EvalResult:
    accuracies = np.array([fold.accuracy for fold in folds])
    counts = np.array([fold.nsv for fold in folds], dtype=float)
    return EvalResult(
        dataset=data.name,
        C=cfg.C,
        sigma=cfg.sigma,
        mean_acc=float(accuracies.mean()),
        std_acc=float(accuracies.std()),
        mean_nsv=float(counts.mean()),
        std_nsv=float(counts.std()),
        cpu_seconds=float(sum(fold.seconds for fold in folds)),
        folds=tuple(folds),
    )


def _evaluate_cells(
    data: Dataset,
    configs: Sequence[SolverConfig],
    plan: CvPlan,
    threads: int,
    logger: structlog.stdlib.BoundLogger,
) -> List[EvalResult]:
    check_plan(data, plan)
    tasks = _split_tasks(data, plan, len(configs))

    def run(task: _FoldTask) -> Tuple[Tuple[int, int, int], FoldResult]:
        cfg = configs[task.cell]
        try:
            result = _run_fold(data, task, cfg)
        except SolverError as exc:
            raise SolverError(
                exc.iteration,
                f"grid cell (C={cfg.C:g}, sigma={cfg.sigma:g}), "
                f"repeat {task.repeat}, fold {task.fold}: {exc.detail}",
            ) from exc
        logger.debug(
            "cv.fold_completed",
            C=cfg.C,
            sigma=cfg.sigma,
            repeat=task.repeat,
            fold=task.fold,
            accuracy=result.accuracy,
            nsv=result.nsv,
        )
        return (task.cell, task.repeat, task.fold), result

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        keyed = dict(pool.map(run, tasks))

    results: List[EvalResult] = []
    for cell, cfg in enumerate(configs):
        folds = [keyed[key] for key in sorted(keyed) if key[0] == cell]
        results.append(_aggregate(data, cfg, folds))
    return results


def cross_validate(
    data: Dataset,
    plan: CvPlan,
    cfg: SolverConfig,
    *,
    threads: int = 1,
    logger: Optional[structlog.stdlib.BoundLogger] = None,
) -> EvalResult:
    """Repeated stratified k-fold evaluation of one solver configuration."""

    log = (logger or get_logger("qshs.evaluation")).bind(dataset=data.name)
    result = _evaluate_cells(data, [cfg], plan, threads, log)[0]
    log.info(
        "cv.completed",
        C=cfg.C,
        sigma=cfg.sigma,
        mACC=result.mean_acc,
        mNSV=result.mean_nsv,
        cpu_s=result.cpu_seconds,
    )
    return result


def _selection_key(result: EvalResult) -> Tuple[float, float, float, float]:
    return (-result.mean_acc, result.mean_nsv, result.C, result.sigma)


def select_best(table: Iterable[EvalResult]) -> EvalResult:
    """Highest mACC, then fewest SVs, then smaller ``C``, then smaller ``sigma``."""

    results = list(table)
    if not results:
        raise EvaluationError("Cannot select from an empty result table")
    return min(results, key=_selection_key)


def grid_search(
    data: Dataset,
    grid: GridSpec,
    plan: CvPlan,
    cfg: SolverConfig,
    *,
    threads: int = 1,
    logger: Optional[structlog.stdlib.BoundLogger] = None,
) -> GridSearchResult:
    """Cross-validate every ``(C, sigma)`` cell; other solver settings come from ``cfg``."""

    log = (logger or get_logger("qshs.evaluation")).bind(dataset=data.name)
    configs = [cfg.model_copy(update={"C": C, "sigma": sigma}) for C, sigma in grid.cells()]
    if not configs:
        raise EvaluationError("Grid has no cells")

    table = _evaluate_cells(data, configs, plan, threads, log)
    for result in table:
        log.debug("grid.cell_completed", C=result.C, sigma=result.sigma, mACC=result.mean_acc)
    best = select_best(table)
    log.info(
        "grid.completed",
        cells=len(table),
        best_C=best.C,
        best_sigma=best.sigma,
        mACC=best.mean_acc,
    )
    return GridSearchResult(best_C=best.C, best_sigma=best.sigma, table=table)


# ----------------------------------------------------------------------
# Rank statistics
# ----------------------------------------------------------------------
def nemenyi_cd(l: int, h: int, q_alpha: float) -> float:  # noqa: E741
    """Nemenyi critical difference ``q_alpha * sqrt(l (l + 1) / (6 h))``."""

    if l < 2:
        raise EvaluationError(f"Need at least 2 methods, got {l}")
    if h < 1:
        raise EvaluationError(f"Need at least 1 dataset, got {h}")
    if not (q_alpha > 0.0 and math.isfinite(q_alpha)):
        raise EvaluationError(f"q_alpha must be positive, got {q_alpha}")
    return q_alpha * math.sqrt(l * (l + 1) / (6.0 * h))


def average_ranks(score_table: Sequence[Sequence[float]]) -> np.ndarray:
    """Mean rank per method (rows) over datasets (columns); 1 is best, ties share mid-ranks."""

    rows = [list(row) for row in score_table]
    if not rows or not rows[0]:
        raise EvaluationError("Score table is empty")
    width = len(rows[0])
    if any(len(row) != width for row in rows):
        raise EvaluationError("Score table is ragged")

    scores = np.asarray(rows, dtype=float)
    ranks = np.column_stack([rankdata(-scores[:, j], method="average") for j in range(width)])
    return ranks.mean(axis=1)


# ----------------------------------------------------------------------
# Export
# ----------------------------------------------------------------------
def export_results(results: Sequence[EvalResult], path: Path) -> None:
    """Write a result table as ``.csv`` or ``.json`` depending on the suffix."""

    path = Path(path)
    rows = [result.as_row() for result in results]
    suffix = path.suffix.lower()
    if suffix not in {".csv", ".json"}:
        raise EvaluationError(f"Unsupported results format '{path.suffix}'; use .csv or .json")

    path.parent.mkdir(parents=True, exist_ok=True)
    if suffix == ".json":
        with path.open("w", encoding="utf-8") as handle:
            json.dump(rows, handle, indent=2)
            handle.write("\n")
        return

    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(RESULT_COLUMNS), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({key: _cell(value) for key, value in row.items()})


def _cell(value: Any) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)
