"""Datasets, [-1, 1] feature scaling, CSV ingestion and synthetic generators."""

from __future__ import annotations

import csv
import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from sklearn.preprocessing import MinMaxScaler

from .config import CsvOptions
from .synthetic import SURFACES, surface_kinds

MAX_REJECTION_ROUNDS = 1000
OUTLIER_MARGIN_FACTOR = 3.0
SCALED_RANGE = (-1.0, 1.0)


class DataError(RuntimeError):
    """Raised for unreadable, inconsistent or unusable datasets."""


@dataclass(frozen=True, eq=False)
class Dataset:
    """``N`` samples of ``n`` real features with labels in ``{-1, +1}``."""

    X: np.ndarray
    y: np.ndarray
    name: str = "dataset"
    feature_names: Optional[Tuple[str, ...]] = None
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        X = np.array(self.X, dtype=float, copy=True, ndmin=2)
        y = np.array(self.y, dtype=float, copy=True).ravel()
        if X.size == 0:
            X = X.reshape(0, X.shape[1])
        if X.shape[0] != y.shape[0]:
            raise DataError(f"Got {X.shape[0]} feature rows but {y.shape[0]} labels")
        if y.size and not np.all(np.isin(y, (-1.0, 1.0))):
            raise DataError("Labels must be -1 or +1")
        if self.feature_names is not None and len(self.feature_names) != X.shape[1]:
            raise DataError("feature_names length does not match the feature count")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def validate_for_training(self) -> None:
        """Reject datasets the solver cannot train on."""

        if self.n_samples < 2:
            raise DataError(f"Dataset '{self.name}' needs at least 2 samples, got {self.n_samples}")
        if self.n_features < 1:
            raise DataError(f"Dataset '{self.name}' has no features")
        if not np.all(np.isfinite(self.X)):
            raise DataError(f"Dataset '{self.name}' contains non-finite features")
        if np.unique(self.y).size < 2:
            raise DataError(f"Dataset '{self.name}' contains a single class")

    def subset(self, indices: Sequence[int], *, name: Optional[str] = None) -> "Dataset":
        idx = np.asarray(indices, dtype=int)
        return Dataset(
            X=self.X[idx],
            y=self.y[idx],
            name=name or self.name,
            feature_names=self.feature_names,
            metadata=dict(self.metadata),
        )


@dataclass(frozen=True, eq=False)
class FeatureScaler:
    """Per-feature min-max map onto ``[-1, 1]``; constant features map to 0."""

    minimum: np.ndarray
    maximum: np.ndarray

    def __post_init__(self) -> None:
        minimum = np.array(self.minimum, dtype=float, copy=True).ravel()
        maximum = np.array(self.maximum, dtype=float, copy=True).ravel()
        if minimum.shape != maximum.shape:
            raise DataError("Scaler bounds have different lengths")
        if np.any(minimum > maximum):
            raise DataError("Scaler minimum exceeds maximum")
        minimum.setflags(write=False)
        maximum.setflags(write=False)
        object.__setattr__(self, "minimum", minimum)
        object.__setattr__(self, "maximum", maximum)

    @classmethod
    def identity(cls, n: int) -> "FeatureScaler":
        return cls(minimum=-np.ones(n), maximum=np.ones(n))

    @property
    def n_features(self) -> int:
        return self.minimum.size

    def transform(self, X) -> np.ndarray:
        return apply_scaler(self, X)


def fit_scaler(X) -> FeatureScaler:
    """Fit per-feature bounds on ``X`` (at least one row)."""

    matrix = np.asarray(X, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] < 1:
        raise DataError("fit_scaler needs a 2-D matrix with at least one row")
    fitted = MinMaxScaler(feature_range=SCALED_RANGE).fit(matrix)
    return FeatureScaler(minimum=fitted.data_min_, maximum=fitted.data_max_)


def apply_scaler(scaler: FeatureScaler, X) -> np.ndarray:
    """``2 (x - min) / (max - min) - 1`` per feature, without clamping."""

    matrix = np.asarray(X, dtype=float)
    squeeze = matrix.ndim == 1
    matrix = np.atleast_2d(matrix)
    if matrix.shape[1] != scaler.n_features:
        raise DataError(
            f"Expected {scaler.n_features} features, got {matrix.shape[1]}"
        )
    if matrix.shape[0] == 0:
        return matrix.copy()
    bounds = np.vstack([scaler.minimum, scaler.maximum])
    scaled = MinMaxScaler(feature_range=SCALED_RANGE).fit(bounds).transform(matrix)
    # Constant features sit at the centre of the range.
    scaled[:, scaler.maximum == scaler.minimum] = 0.0
    return scaled[0] if squeeze else scaled


# ----------------------------------------------------------------------
# CSV ingestion
# ----------------------------------------------------------------------
def _label_key(raw: str) -> str:
    """Canonical text for a label so that ``1``, ``1.0`` and `` 1`` agree."""

    text = raw.strip()
    try:
        number = float(text)
    except ValueError:
        return text
    if math.isfinite(number) and number.is_integer():
        return str(int(number))
    return repr(number)


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def read_table(path: Path, options: CsvOptions) -> Tuple[Optional[List[str]], List[List[str]]]:
    """Return ``(header, rows)`` with comments, blank lines and header removed."""

    try:
        with Path(path).open("r", encoding="utf-8", newline="") as handle:
            lines = [
                line for line in handle
                if line.strip() and not line.lstrip().startswith("#")
            ]
    except FileNotFoundError as exc:
        raise DataError(f"Data file not found: {path}") from exc
    except UnicodeDecodeError as exc:
        raise DataError(f"Data file is not UTF-8: {path}") from exc

    rows = [[cell.strip() for cell in row] for row in csv.reader(lines, delimiter=options.delimiter)]
    if not rows:
        return None, []

    first = rows[0]
    has_header = options.header
    if has_header is None:
        # Text labels are legal, so a lone non-numeric label cell is not a header.
        label_at = options.label_column % len(first) if first else None
        textual = [j for j, cell in enumerate(first) if not _is_number(cell)]
        has_header = bool(textual) and (
            len(textual) == len(first) or any(j != label_at for j in textual)
        )
    header = first if has_header else None
    body = rows[1:] if has_header else rows

    width = len(header) if header is not None else len(body[0]) if body else 0
    for line_no, row in enumerate(body, start=2 if has_header else 1):
        if len(row) != width:
            raise DataError(f"{path}: row {line_no} has {len(row)} cells, expected {width}")
    return header, body


def _parse_features(path: Path, rows: List[List[str]], columns: List[int]) -> np.ndarray:
    X = np.empty((len(rows), len(columns)))
    for i, row in enumerate(rows):
        for j, column in enumerate(columns):
            try:
                X[i, j] = float(row[column])
            except ValueError as exc:
                raise DataError(
                    f"{path}: non-numeric cell {row[column]!r} at row {i + 1}, column {column + 1}"
                ) from exc
    if not np.all(np.isfinite(X)):
        raise DataError(f"{path}: features must be finite")
    return X


def _label_mapping(raw_labels: List[str], options: CsvOptions) -> Dict[str, int]:
    keys = sorted(
        set(raw_labels),
        key=lambda k: (not _is_number(k), float(k) if _is_number(k) else 0.0, k),
    )

    if options.label_map is not None:
        mapping = {_label_key(k): v for k, v in options.label_map.items()}
        missing = [k for k in keys if k not in mapping]
        if missing:
            raise DataError(f"Labels {missing} are not covered by label_map")
        return {k: mapping[k] for k in keys}

    if options.binarize is not None:
        positive = _label_key(options.binarize)
        return {k: 1 if k == positive else -1 for k in keys}

    if set(keys) <= {"-1", "1"}:
        return {k: int(k) for k in keys}
    if set(keys) <= {"0", "1"}:
        return {k: 1 if k == "1" else -1 for k in keys}
    if len(keys) == 2:
        return {keys[0]: -1, keys[1]: 1}
    if len(keys) > 2:
        raise DataError(
            f"Found {len(keys)} distinct labels; pass an explicit binarize rule or label_map"
        )
    raise DataError(f"Cannot map label {keys[0]!r} to -1/+1 without a label_map")


def load_csv(path: Path, options: Optional[CsvOptions] = None) -> Dataset:
    """Load a labelled dataset; one label column, every other column a feature."""

    options = options or CsvOptions()
    path = Path(path)
    header, rows = read_table(path, options)

    if not rows:
        return Dataset(
            X=np.empty((0, 0)),
            y=np.empty(0),
            name=path.stem,
            metadata={"source": "csv", "path": str(path), "label_mapping": {}},
        )

    width = len(rows[0])
    if width < 2:
        raise DataError(f"{path}: need at least one feature column and a label column")
    label_column = options.label_column % width if -width <= options.label_column < width else None
    if label_column is None:
        raise DataError(f"{path}: label column {options.label_column} out of range for {width} columns")

    feature_columns = [j for j in range(width) if j != label_column]
    X = _parse_features(path, rows, feature_columns)
    raw_labels = [_label_key(row[label_column]) for row in rows]
    mapping = _label_mapping(raw_labels, options)
    y = np.array([mapping[label] for label in raw_labels], dtype=float)

    feature_names = tuple(header[j] for j in feature_columns) if header is not None else None
    return Dataset(
        X=X,
        y=y,
        name=path.stem,
        feature_names=feature_names,
        metadata={
            "source": "csv",
            "path": str(path),
            "label_column": label_column,
            "label_mapping": mapping,
        },
    )


def load_feature_matrix(
    path: Path,
    n_features: int,
    options: Optional[CsvOptions] = None,
) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """Load rows for prediction.

    Rows with exactly ``n_features`` cells are unlabelled; rows with one extra
    cell are treated as labelled data and parsed with :func:`load_csv`.
    """

    options = options or CsvOptions()
    _, rows = read_table(Path(path), options)
    if not rows:
        return np.empty((0, n_features)), None
    width = len(rows[0])
    if width == n_features:
        return _parse_features(Path(path), rows, list(range(width))), None
    if width == n_features + 1:
        dataset = load_csv(path, options)
        return np.array(dataset.X), np.array(dataset.y)
    raise DataError(
        f"{path}: rows have {width} cells but the model expects {n_features} features"
    )


def write_csv(dataset: Dataset, path: Path) -> None:
    """Write features then label, with a header and round-trip exact floats."""

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = dataset.feature_names or tuple(f"x{j + 1}" for j in range(dataset.n_features))
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow([*names, "label"])
        for row, label in zip(dataset.X, dataset.y):
            writer.writerow([repr(float(value)) for value in row] + [str(int(label))])


# ----------------------------------------------------------------------
# Synthetic data
# ----------------------------------------------------------------------
def _surface(kind: str, params: Optional[Dict[str, Any]] = None):
    try:
        factory = SURFACES[kind]
    except KeyError as exc:
        kinds = surface_kinds()
        raise DataError(f"Unknown synthetic kind '{kind}'; choose from {kinds}") from exc
    return factory(**(params or {}))


def _surface_params(surface) -> Dict[str, Any]:
    return {
        key: value
        for key, value in dataclasses.asdict(surface).items()
        if key not in {"kind", "box"}
    }


def _sample_box(rng: np.random.Generator, box, size: int) -> np.ndarray:
    (x_lo, x_hi), (y_lo, y_hi) = box
    return np.column_stack([rng.uniform(x_lo, x_hi, size), rng.uniform(y_lo, y_hi, size)])


def gen_synthetic(kind: str, n_samples: int, margin: float = 0.1, seed: int = 0) -> Dataset:
    """Class-balanced 2-D sample, strictly separated by a canonical quadratic.

    Points with ``|surface(x)| < margin`` are rejected, so every kept point
    satisfies ``label * surface(x) >= margin``.
    """

    if n_samples < 4:
        raise DataError(f"n_samples must be at least 4, got {n_samples}")
    if not margin > 0.0:
        raise DataError(f"margin must be positive, got {margin}")
    surface = _surface(kind)
    rng = np.random.default_rng(seed)

    n_pos = (n_samples + 1) // 2
    n_neg = n_samples // 2
    positives: List[np.ndarray] = []
    negatives: List[np.ndarray] = []
    have_pos = have_neg = 0
    batch = max(64, 2 * n_samples)

    rounds = 0
    while have_pos < n_pos or have_neg < n_neg:
        if rounds == MAX_REJECTION_ROUNDS:
            raise DataError(f"Could not draw {n_samples} points with margin {margin} for '{kind}'")
        points = _sample_box(rng, surface.box, batch)
        values = surface.value(points)
        pos = points[values >= margin]
        neg = points[values <= -margin]
        positives.append(pos)
        negatives.append(neg)
        have_pos += len(pos)
        have_neg += len(neg)
        rounds += 1

    X = np.vstack([np.vstack(positives)[:n_pos], np.vstack(negatives)[:n_neg]])
    y = np.concatenate([np.ones(n_pos), -np.ones(n_neg)])
    order = rng.permutation(n_samples)

    return Dataset(
        X=X[order],
        y=y[order],
        name=f"{kind}-{n_samples}-s{seed}",
        feature_names=("x1", "x2"),
        metadata={
            "source": "synthetic",
            "kind": kind,
            "margin": margin,
            "seed": seed,
            "surface_params": _surface_params(surface),
        },
    )


def separability_margin(dataset: Dataset) -> float:
    """Minimum of ``label * surface(x)`` for a synthetic dataset."""

    kind = dataset.metadata.get("kind")
    if dataset.metadata.get("source") != "synthetic" or kind is None:
        raise DataError(f"Dataset '{dataset.name}' has no generating surface")
    surface = _surface(kind, dataset.metadata.get("surface_params"))
    return float(np.min(dataset.y * surface.value(np.asarray(dataset.X))))


def inject_noise(
    data: Dataset,
    label_flips: int = 0,
    outliers: int = 0,
    seed: int = 0,
) -> Dataset:
    """Flip labels and append outliers deep inside the opposite class region.

    Outliers alternate between labels ``+1`` and ``-1`` and are placed where
    the generating surface assigns the other label with
    ``|surface(x)| >= 3 * margin``; they therefore need a synthetic dataset.
    """

    N = data.n_samples
    if label_flips < 0 or outliers < 0:
        raise DataError("Noise counts must be nonnegative")
    if label_flips > N or outliers > N:
        raise DataError(f"Noise counts ({label_flips}, {outliers}) exceed the {N} samples")
    if label_flips == 0 and outliers == 0:
        return data

    rng = np.random.default_rng(seed)
    X = np.array(data.X)
    y = np.array(data.y)

    flipped = np.empty(0, dtype=int)
    if label_flips:
        flipped = np.sort(rng.choice(N, size=label_flips, replace=False))
    y[flipped] *= -1.0

    outlier_rows: List[np.ndarray] = []
    outlier_labels: List[float] = []
    if outliers:
        kind = data.metadata.get("kind")
        if data.metadata.get("source") != "synthetic" or kind is None:
            raise DataError("Outlier injection needs a synthetic dataset with a known surface")
        surface = _surface(kind, data.metadata.get("surface_params"))
        depth = OUTLIER_MARGIN_FACTOR * float(data.metadata.get("margin", 0.1))
        for j in range(outliers):
            label = 1.0 if j % 2 == 0 else -1.0
            for _ in range(MAX_REJECTION_ROUNDS):
                candidates = _sample_box(rng, surface.box, 64)
                deep = candidates[-label * surface.value(candidates) >= depth]
                if len(deep):
                    outlier_rows.append(deep[0])
                    outlier_labels.append(label)
                    break
            else:
                raise DataError(f"Could not place an outlier {depth} deep inside '{kind}'")

    if outlier_rows:
        X = np.vstack([X, np.vstack(outlier_rows)])
        y = np.concatenate([y, np.asarray(outlier_labels)])

    metadata = dict(data.metadata)
    metadata.update(
        {
            "noise_seed": seed,
            "flipped_indices": [int(i) for i in flipped],
            "outlier_indices": list(range(N, N + len(outlier_rows))),
        }
    )
    return Dataset(
        X=X,
        y=y,
        name=f"{data.name}-noisy",
        feature_names=data.feature_names,
        metadata=metadata,
    )


def clean_indices(data: Dataset) -> np.ndarray:
    """Indices that were neither flipped nor appended as outliers."""

    noisy = set(data.metadata.get("flipped_indices", [])) | set(data.metadata.get("outlier_indices", []))
    return np.array([i for i in range(data.n_samples) if i not in noisy], dtype=int)
