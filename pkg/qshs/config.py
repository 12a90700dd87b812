"""Configuration models and helpers for qshs."""

from __future__ import annotations

import math
import os
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

THREADS_ENV_VAR = "QSHS_THREADS"

DEFAULT_ETA = 1.618
DEFAULT_MAX_ITER = 1000
DEFAULT_TOL = 1e-3
# G sums over samples, so useful sigma grows with N; these suit a few hundred rows.
DEFAULT_C = 1e7
DEFAULT_SIGMA = 1e3


def default_c_grid() -> List[float]:
    """Penalty grid ``{10^-7, ..., 10^7}``."""

    return [10.0**k for k in range(-7, 8)]


def default_sigma_grid() -> List[float]:
    """Augmented-penalty grid ``{sqrt(2)^-7, ..., sqrt(2)^7}``."""

    return [math.sqrt(2.0) ** k for k in range(-7, 8)]


class ConfigError(RuntimeError):
    """Raised when configuration files cannot be parsed or are invalid."""


class SolverConfig(BaseModel):
    """Parameters of one ADMM fit."""

    C: float = Field(default=DEFAULT_C, gt=0.0)
    sigma: float = Field(default=DEFAULT_SIGMA, gt=0.0)
    eta: float = Field(default=DEFAULT_ETA, gt=0.0)
    max_iter: int = Field(default=DEFAULT_MAX_ITER, ge=0)
    tol: float = Field(default=DEFAULT_TOL, gt=0.0)
    # None selects the trace-scaled default 1e-10 * (1 + trace(G) / m).
    ridge: Optional[float] = Field(default=None, ge=0.0)
    cg_tol: float = Field(default=1e-10, gt=0.0)
    # None means "order of the system".
    cg_max_iter: Optional[int] = Field(default=None, ge=1)
    linear_solver: Literal["auto", "direct", "cg"] = "auto"
    offset_step: Literal["working_set", "full"] = "working_set"
    record_history: bool = False

    model_config = ConfigDict(extra="forbid", frozen=True)

    @property
    def gamma(self) -> float:
        """Proximal step paired with ``sigma`` (gamma = 1 / sigma)."""

        return 1.0 / self.sigma


class CvPlan(BaseModel):
    """Repeated stratified k-fold plan."""

    folds: int = Field(default=10, ge=2)
    repeats: int = Field(default=10, ge=1)
    seed: int = Field(default=0, ge=0)

    model_config = ConfigDict(extra="forbid", frozen=True)


class GridSpec(BaseModel):
    """Cartesian grid over ``(C, sigma)``."""

    C_values: List[float] = Field(default_factory=default_c_grid, min_length=1)
    sigma_values: List[float] = Field(default_factory=default_sigma_grid, min_length=1)

    model_config = ConfigDict(extra="forbid", frozen=True)

    @field_validator("C_values", "sigma_values")
    @classmethod
    def check_positive(cls, values: List[float]) -> List[float]:
        if any(not (value > 0.0 and math.isfinite(value)) for value in values):
            raise ValueError("Grid values must be finite and positive.")
        return values

    def cells(self) -> List[tuple[float, float]]:
        """All ``(C, sigma)`` pairs in row-major order."""

        return [(c, s) for c in self.C_values for s in self.sigma_values]


class CsvOptions(BaseModel):
    """How a CSV file maps onto features and labels."""

    # Position of the label column; negative values count from the end.
    label_column: int = -1
    # None auto-detects a header from non-numeric feature cells in the first row.
    header: Optional[bool] = None
    # Explicit raw-label -> {-1, +1} mapping, keys compared as stripped text.
    label_map: Optional[Dict[str, int]] = None
    # Raw label treated as +1, every other label as -1 ("class k vs rest").
    binarize: Optional[str] = None
    delimiter: str = Field(default=",", min_length=1, max_length=1)

    model_config = ConfigDict(extra="forbid", frozen=True)

    @field_validator("label_map")
    @classmethod
    def check_label_map(cls, mapping: Optional[Dict[str, int]]) -> Optional[Dict[str, int]]:
        if mapping is not None and any(value not in (-1, 1) for value in mapping.values()):
            raise ValueError("label_map values must be -1 or +1.")
        return mapping


class RuntimeSettings(BaseModel):
    """Process-level defaults."""

    threads: int = Field(default_factory=lambda: os.cpu_count() or 1, ge=1)
    log_level: str = Field(default="INFO")

    model_config = ConfigDict(extra="forbid")


class RunConfig(BaseModel):
    """Top-level configuration file model."""

    solver: SolverConfig = Field(default_factory=SolverConfig)
    cv: CvPlan = Field(default_factory=CvPlan)
    grid: GridSpec = Field(default_factory=GridSpec)
    csv: CsvOptions = Field(default_factory=CsvOptions)
    runtime: RuntimeSettings = Field(default_factory=RuntimeSettings)

    model_config = ConfigDict(extra="forbid")


def _read_yaml(path: Path) -> Dict[str, Any]:
    try:
        with path.open("r", encoding="utf-8") as handle:
            data = yaml.safe_load(handle) or {}
    except FileNotFoundError as exc:
        raise ConfigError(f"Configuration file not found: {path}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"Failed to parse YAML file: {path}") from exc

    if not isinstance(data, dict):
        raise ConfigError(f"Expected mapping at top level of {path}")
    return data


def apply_env_overrides(config: RunConfig, environ: Optional[Dict[str, str]] = None) -> RunConfig:
    """Apply ``QSHS_THREADS`` on top of ``config``."""

    env = os.environ if environ is None else environ
    raw = env.get(THREADS_ENV_VAR)
    if raw is None or not raw.strip():
        return config
    try:
        threads = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{THREADS_ENV_VAR} must be an integer, got {raw!r}") from exc
    if threads < 1:
        raise ConfigError(f"{THREADS_ENV_VAR} must be at least 1, got {threads}")
    runtime = config.runtime.model_copy(update={"threads": threads})
    return config.model_copy(update={"runtime": runtime})


def load_run_config(path: Optional[Path] = None) -> RunConfig:
    """Load and validate a run configuration, falling back to defaults."""

    if path is None:
        return apply_env_overrides(RunConfig())

    payload = _read_yaml(path)
    try:
        config = RunConfig.model_validate(payload)
    except ValidationError as exc:
        raise ConfigError(f"Invalid run configuration {path}: {exc}") from exc
    return apply_env_overrides(config)


def write_run_config(path: Path, config: RunConfig) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        yaml.safe_dump(config.model_dump(mode="python"), handle, sort_keys=False)
