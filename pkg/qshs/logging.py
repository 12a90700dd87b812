"""structlog setup for the qshs CLI and solver."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Any, MutableMapping, Optional, Union

import numpy as np
import structlog

# Emits one DEBUG record per ADMM iteration; muted unless tracing is requested.
SOLVER_LOGGER = "qshs.admm"


def _numpy_to_builtin(
    _logger: Any, _method: str, event_dict: MutableMapping[str, Any]
) -> MutableMapping[str, Any]:
    """Residuals, counts and index arrays arrive as numpy values."""

    for key, value in event_dict.items():
        if isinstance(value, np.generic):
            event_dict[key] = value.item()
        elif isinstance(value, np.ndarray):
            event_dict[key] = value.tolist()
    return event_dict


def configure_logging(
    level: str = "INFO",
    json_output: bool = False,
    log_file: Optional[Union[str, Path]] = None,
    trace_solver: bool = False,
) -> None:
    """Route structlog through stdlib logging.

    ``trace_solver`` lets per-iteration solver records through at DEBUG;
    otherwise the solver logger stays at INFO or above even with ``level``
    set to DEBUG.
    """

    handlers: list[logging.Handler] = [logging.StreamHandler()]
    if log_file:
        log_path = Path(log_file).expanduser()
        log_path.parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(log_path, encoding="utf-8"))

    logging.basicConfig(level=level, format="%(message)s", handlers=handlers, force=True)

    renderer = (
        structlog.processors.JSONRenderer() if json_output else structlog.dev.ConsoleRenderer()
    )
    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.stdlib.add_log_level,
            structlog.stdlib.add_logger_name,
            _numpy_to_builtin,
            structlog.processors.format_exc_info,
            renderer,
        ],
        wrapper_class=structlog.stdlib.BoundLogger,
        logger_factory=structlog.stdlib.LoggerFactory(),
        cache_logger_on_first_use=True,
    )

    root_level = logging.getLevelName(level.upper())
    solver_level = root_level if trace_solver else max(root_level, logging.INFO)
    logging.getLogger(SOLVER_LOGGER).setLevel(solver_level)
    # Boundary SVG rendering pulls in matplotlib, which is chatty at DEBUG.
    logging.getLogger("matplotlib").setLevel(max(root_level, logging.WARNING))


def get_logger(name: Optional[str] = None) -> structlog.stdlib.BoundLogger:
    return structlog.get_logger(name)
