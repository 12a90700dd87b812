import json
import logging

import numpy as np
import pytest

from qshs.logging import SOLVER_LOGGER, _numpy_to_builtin, configure_logging, get_logger


def test_numpy_values_become_builtins():
    event = _numpy_to_builtin(
        None,
        "info",
        {"event": "admm.iteration", "k": np.int64(3), "res": np.float64(0.5), "T": np.arange(3)},
    )
    assert event == {"event": "admm.iteration", "k": 3, "res": 0.5, "T": [0, 1, 2]}
    assert type(event["k"]) is int
    assert type(event["res"]) is float


@pytest.mark.parametrize(
    "level, trace_solver, expected",
    [
        ("DEBUG", False, logging.INFO),
        ("DEBUG", True, logging.DEBUG),
        ("WARNING", False, logging.WARNING),
        ("WARNING", True, logging.WARNING),
    ],
)
def test_solver_logger_level(level, trace_solver, expected):
    configure_logging(level=level, trace_solver=trace_solver)
    assert logging.getLogger(SOLVER_LOGGER).level == expected
    assert logging.getLogger("matplotlib").level >= logging.WARNING


def test_json_log_file_carries_numpy_fields(tmp_path):
    path = tmp_path / "logs" / "run.jsonl"
    configure_logging(level="INFO", json_output=True, log_file=path)
    get_logger("qshs.cli").info("train.completed", nsv=np.int64(4), accuracy=np.float32(1.0))
    logging.shutdown()

    record = json.loads(path.read_text().splitlines()[-1])
    assert record["event"] == "train.completed"
    assert record["nsv"] == 4
    assert record["accuracy"] == 1.0
    assert record["logger"] == "qshs.cli"
