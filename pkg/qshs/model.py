"""Trained quadratic-surface classifiers and their on-disk format."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Tuple

import numpy as np

from .data import DataError, FeatureScaler, apply_scaler
from .quadmap import QuadMapError, hvec, unhvec

MODEL_VERSION = 1


class ModelFormatError(RuntimeError):
    """Raised when a model file cannot be parsed or is inconsistent."""


class ModelDimensionError(ValueError):
    """Raised when an input does not have the model's feature count."""


@dataclass(frozen=True, eq=False)
class QuadraticSurfaceModel:
    """Decision function ``f(x) = 0.5 x^T W x + b^T x + c`` on scaled inputs."""

    W: np.ndarray
    b: np.ndarray
    c: float
    scaler: FeatureScaler
    meta: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        W = np.array(self.W, dtype=float, copy=True)
        b = np.array(self.b, dtype=float, copy=True).ravel()
        n = b.size
        if W.shape != (n, n):
            raise ModelFormatError(f"W has shape {W.shape}, expected ({n}, {n})")
        if not np.array_equal(W, W.T):
            raise ModelFormatError("W must be symmetric")
        if self.scaler.n_features != n:
            raise ModelFormatError(
                f"Scaler covers {self.scaler.n_features} features, model has {n}"
            )
        W.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", float(self.c))

    @property
    def n_features(self) -> int:
        return self.b.size

    def decision_values(self, X) -> np.ndarray:
        return decision_values(self, X)

    def predict(self, X) -> np.ndarray:
        return predict_batch(self, X)


@dataclass(frozen=True)
class FeatureReport:
    """Per-feature importance ``|w_ii| + |b_i|`` plus pairwise ``|w_ij|``."""

    ranking: List[Tuple[int, float]]
    interactions: np.ndarray

    def top(self, k: int) -> List[int]:
        return [index for index, _ in self.ranking[:k]]


def from_solution(
    w_tilde,
    b,
    c: float,
    scaler: FeatureScaler,
    meta: Dict[str, Any] | None = None,
) -> QuadraticSurfaceModel:
    b_vector = np.asarray(b, dtype=float).ravel()
    return QuadraticSurfaceModel(
        W=unhvec(w_tilde, b_vector.size),
        b=b_vector,
        c=c,
        scaler=scaler,
        meta=dict(meta or {}),
    )


def _check_width(model: QuadraticSurfaceModel, width: int) -> None:
    if width != model.n_features:
        raise ModelDimensionError(
            f"Model expects {model.n_features} features, got {width}"
        )


def _scaled_decision(model: QuadraticSurfaceModel, scaled: np.ndarray) -> np.ndarray:
    quadratic = 0.5 * np.einsum("ij,jk,ik->i", scaled, model.W, scaled)
    return quadratic + scaled @ model.b + model.c


def decision_value(model: QuadraticSurfaceModel, x) -> float:
    """``f(x)`` for one already-scaled sample."""

    vector = np.asarray(x, dtype=float).ravel()
    _check_width(model, vector.size)
    return float(_scaled_decision(model, vector[None, :])[0])


def decision_values(model: QuadraticSurfaceModel, X) -> np.ndarray:
    """``f`` for every row of raw (unscaled) ``X``."""

    matrix = np.asarray(X, dtype=float)
    if matrix.ndim == 1:
        matrix = matrix[None, :]
    if matrix.shape[0] == 0:
        return np.empty(0)
    _check_width(model, matrix.shape[1])
    try:
        scaled = apply_scaler(model.scaler, matrix)
    except DataError as exc:
        raise ModelDimensionError(str(exc)) from exc
    return _scaled_decision(model, scaled)


def _sign(values: np.ndarray) -> np.ndarray:
    # f(x) == 0 is assigned to the positive class.
    return np.where(values >= 0.0, 1, -1).astype(int)


def predict(model: QuadraticSurfaceModel, x) -> int:
    """Label in ``{-1, +1}`` for one raw sample."""

    return int(_sign(decision_values(model, x))[0])


def predict_batch(model: QuadraticSurfaceModel, X) -> np.ndarray:
    return _sign(decision_values(model, X))


def is_linear(model: QuadraticSurfaceModel, atol: float = 0.0) -> bool:
    """Whether the quadratic term vanishes, i.e. the surface is a hyperplane."""

    return bool(np.all(np.abs(model.W) <= atol))


def feature_report(model: QuadraticSurfaceModel) -> FeatureReport:
    """Rank features by ``|w_ii| + |b_i|``; ties keep ascending index order."""

    scores = np.abs(np.diag(model.W)) + np.abs(model.b)
    ranking = sorted(
        ((int(i), float(score)) for i, score in enumerate(scores)),
        key=lambda item: (-item[1], item[0]),
    )
    interactions = np.abs(np.array(model.W))
    np.fill_diagonal(interactions, 0.0)
    return FeatureReport(ranking=ranking, interactions=interactions)


# ----------------------------------------------------------------------
# Persistence
# ----------------------------------------------------------------------
def _floats(values) -> List[float]:
    return [float(value) for value in np.asarray(values, dtype=float).ravel()]


def to_payload(model: QuadraticSurfaceModel) -> Dict[str, Any]:
    return {
        "version": MODEL_VERSION,
        "n": model.n_features,
        "hvec_w": _floats(hvec(model.W)),
        "b": _floats(model.b),
        "c": float(model.c),
        "scaler_min": _floats(model.scaler.minimum),
        "scaler_max": _floats(model.scaler.maximum),
        "training_meta": model.meta,
    }


def save(model: QuadraticSurfaceModel, path: Path) -> None:
    """Write ``model`` as versioned JSON; floats round-trip bit-exactly."""

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        json.dump(to_payload(model), handle, indent=2)
        handle.write("\n")


def from_payload(payload: Any) -> QuadraticSurfaceModel:
    if not isinstance(payload, dict):
        raise ModelFormatError("Model file must contain a JSON object")
    version = payload.get("version")
    if version != MODEL_VERSION:
        raise ModelFormatError(f"Unsupported model version {version!r}")

    missing = [
        key for key in ("n", "hvec_w", "b", "c", "scaler_min", "scaler_max") if key not in payload
    ]
    if missing:
        raise ModelFormatError(f"Model file is missing keys: {', '.join(missing)}")

    n = payload["n"]
    if not isinstance(n, int) or n < 1:
        raise ModelFormatError(f"Invalid feature count {n!r}")
    for key, expected in (("b", n), ("scaler_min", n), ("scaler_max", n)):
        if len(payload[key]) != expected:
            raise ModelFormatError(f"'{key}' has {len(payload[key])} entries, expected {expected}")

    try:
        W = unhvec(payload["hvec_w"], n)
        scaler = FeatureScaler(
            minimum=np.asarray(payload["scaler_min"], dtype=float),
            maximum=np.asarray(payload["scaler_max"], dtype=float),
        )
        return QuadraticSurfaceModel(
            W=W,
            b=np.asarray(payload["b"], dtype=float),
            c=float(payload["c"]),
            scaler=scaler,
            meta=dict(payload.get("training_meta") or {}),
        )
    except (QuadMapError, DataError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"Inconsistent model payload: {exc}") from exc


def load(path: Path) -> QuadraticSurfaceModel:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError as exc:
        raise ModelFormatError(f"Model file not found: {path}") from exc
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"Failed to parse model file {path}: {exc}") from exc
    return from_payload(payload)
