"""Benchmark reproduction on user-supplied UCI files.

Set ``QSHS_BENCHMARK_DIR`` to a directory holding ``heart-c.csv`` (Cleveland
layout: header row, ``num`` label column, 0 = healthy) and/or
``banknote.csv`` (no header, 0/1 label last). The protocol runs are marked
``slow``; select them with ``pytest -m slow``.
"""

import os
from pathlib import Path

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from qshs.config import CsvOptions, CvPlan, GridSpec, SolverConfig
from qshs.data import DataError, load_csv
from qshs.evaluation import cross_validate, grid_search

BENCHMARK_DIR = os.environ.get("QSHS_BENCHMARK_DIR")
SAMPLE = Path(__file__).parent / "data" / "heart_c_sample.csv"

HEART_C_OPTIONS = CsvOptions(
    header=True, label_map={"0": -1, "1": 1, "2": 1, "3": 1, "4": 1}
)
BANKNOTE_OPTIONS = CsvOptions(header=False, label_map={"0": -1, "1": 1})

PROTOCOL = CvPlan(folds=10, repeats=10, seed=0)
# sigma scaled for a few hundred to ~1400 training rows.
PROTOCOL_GRID = GridSpec(
    C_values=[1e3, 1e4, 1e5, 1e6, 1e7],
    sigma_values=[1e1, 1e2, 1e3, 1e4],
)


def _benchmark_file(name):
    if not BENCHMARK_DIR:
        pytest.skip("QSHS_BENCHMARK_DIR is not set")
    path = Path(BENCHMARK_DIR) / name
    if not path.exists():
        pytest.skip(f"{name} not present in {BENCHMARK_DIR}")
    return path


def _threads():
    return int(os.environ.get("QSHS_THREADS", "1"))


def _protocol_best(data):
    """Grid-search under the 10x10 protocol, then re-run the chosen cell."""

    grid = grid_search(data, PROTOCOL_GRID, PROTOCOL, SolverConfig(), threads=_threads())
    assert len(grid.table) == len(PROTOCOL_GRID.cells())
    best = grid.best
    rerun = cross_validate(
        data,
        PROTOCOL,
        SolverConfig(C=grid.best_C, sigma=grid.best_sigma),
        threads=_threads(),
    )
    assert rerun.mean_acc == best.mean_acc
    assert len(rerun.folds) == 100
    return best


def test_heart_c_style_file_loads_with_header_and_label_map():
    data = load_csv(SAMPLE, HEART_C_OPTIONS)

    assert data.n_samples == 10
    assert data.n_features == 13
    assert data.feature_names[0] == "age"
    assert data.feature_names[-1] == "thal"
    assert_array_equal(data.y, [-1, 1, 1, -1, -1, -1, 1, -1, 1, 1])
    assert data.metadata["label_column"] == 13
    assert data.metadata["label_mapping"] == {"0": -1, "1": 1, "2": 1, "3": 1}
    assert data.X[0, 0] == 63.0 and data.X[-1, 9] == pytest.approx(3.1)


def test_heart_c_style_file_needs_every_label_mapped():
    partial = CsvOptions(header=True, label_map={"0": -1, "1": 1})
    with pytest.raises(DataError, match="not covered"):
        load_csv(SAMPLE, partial)


@pytest.mark.slow
def test_heart_c_protocol_accuracy():
    data = load_csv(_benchmark_file("heart-c.csv"), HEART_C_OPTIONS)
    assert data.n_samples == 303

    best = _protocol_best(data)
    assert best.mean_acc >= 0.99


@pytest.mark.slow
def test_banknote_protocol_accuracy():
    data = load_csv(_benchmark_file("banknote.csv"), BANKNOTE_OPTIONS)
    assert data.n_features == 4

    best = _protocol_best(data)
    assert abs(best.mean_acc - 0.9929) <= 0.02
    assert 0.0 < best.mean_nsv < np.ceil(0.9 * data.n_samples)
