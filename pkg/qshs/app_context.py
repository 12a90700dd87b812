"""Shared application context for qshs CLI commands."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional

from .config import CsvOptions, CvPlan, GridSpec, RunConfig, SolverConfig, load_run_config


@dataclass
class AppContext:
    """Resolved configuration used by CLI commands."""

    config: RunConfig
    config_path: Optional[Path] = None

    @property
    def threads(self) -> int:
        return self.config.runtime.threads

    @property
    def csv(self) -> CsvOptions:
        return self.config.csv

    def solver(self, **overrides: Any) -> SolverConfig:
        """Solver settings with CLI flags layered over the file values."""

        return _merge(self.config.solver, overrides)

    def cv_plan(self, **overrides: Any) -> CvPlan:
        return _merge(self.config.cv, overrides)

    def grid(self, **overrides: Any) -> GridSpec:
        return _merge(self.config.grid, overrides)

    def provenance(self, **sections: Any) -> Dict[str, Any]:
        """Manifest params: the config file path plus the effective configuration.

        ``sections`` replace whole top-level blocks (``solver``, ``cv``, ...)
        with the flag-merged values a command actually ran with. Feeding
        ``config`` back through ``--config`` repeats the run.
        """

        effective = self.config.model_copy(update=sections)
        return {
            "config_path": None if self.config_path is None else str(self.config_path),
            "config": effective.model_dump(mode="json"),
        }


def _merge(model, overrides: Dict[str, Any]):
    explicit = {key: value for key, value in overrides.items() if value is not None}
    if not explicit:
        return model
    # Re-validate so Field constraints apply to flag values too.
    return type(model).model_validate({**model.model_dump(), **explicit})


def load_context(config_path: Optional[Path] = None) -> AppContext:
    """Load the run configuration (or defaults) and apply environment overrides."""

    return AppContext(config=load_run_config(config_path), config_path=config_path)
