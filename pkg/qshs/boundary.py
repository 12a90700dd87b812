"""Decision-boundary export for two-feature models.

The decision function is sampled on a regular grid over the raw input box.
Zero crossings along grid edges are located by linear interpolation, which
gives points on the zero level set ``f(x) = 0``. Everything is written to a
single CSV with a ``kind`` column (``grid``, ``level`` or ``sample``); an SVG
rendering is available when matplotlib is installed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from .data import Dataset
from .logging import get_logger
from .model import QuadraticSurfaceModel, decision_values

DEFAULT_RESOLUTION = 200


class BoundaryError(RuntimeError):
    """Raised when a boundary cannot be produced for a model."""


@dataclass(frozen=True, eq=False)
class BoundaryData:
    xs: np.ndarray
    ys: np.ndarray
    values: np.ndarray  # values[i, j] = f(xs[j], ys[i])
    level_points: np.ndarray
    samples: np.ndarray
    labels: np.ndarray
    support: np.ndarray  # boolean mask over samples
    cell_bound: float

    @property
    def support_points(self) -> np.ndarray:
        return self.samples[self.support]


def _box(model: QuadraticSurfaceModel, data: Optional[Dataset]) -> Tuple[np.ndarray, np.ndarray]:
    if data is not None and data.n_samples:
        low, high = data.X.min(axis=0), data.X.max(axis=0)
    else:
        low, high = np.array(model.scaler.minimum), np.array(model.scaler.maximum)
    span = high - low
    # Degenerate axes get a unit-width window.
    low = np.where(span > 0.0, low, low - 0.5)
    high = np.where(span > 0.0, high, high + 0.5)
    return low, high


def _edge_crossings(a: np.ndarray, b: np.ndarray, start: np.ndarray, step: np.ndarray) -> np.ndarray:
    """Interpolated zero crossings between node values ``a`` and ``b``."""

    crossing = (a * b < 0.0) | ((a == 0.0) & (b != 0.0))
    t = np.zeros_like(a)
    t[crossing] = a[crossing] / (a[crossing] - b[crossing])
    points = start[crossing] + t[crossing][:, None] * step
    return points


def _support_mask(model: QuadraticSurfaceModel, data: Dataset) -> np.ndarray:
    mask = np.zeros(data.n_samples, dtype=bool)
    report = model.meta.get("report") or {}
    indices = report.get("support_vectors") or []
    if model.meta.get("n_samples") != data.n_samples:
        if indices:
            get_logger("qshs.boundary").warning(
                "boundary.support_vectors_skipped",
                reason="samples differ from the training set",
                model_samples=model.meta.get("n_samples"),
                data_samples=data.n_samples,
            )
        return mask
    mask[np.asarray(indices, dtype=int)] = True
    return mask


def compute_boundary(
    model: QuadraticSurfaceModel,
    data: Optional[Dataset] = None,
    resolution: int = DEFAULT_RESOLUTION,
) -> BoundaryData:
    """Sample ``f`` on a ``resolution x resolution`` grid and trace ``f = 0``."""

    if model.n_features != 2:
        raise BoundaryError(
            f"Decision boundaries are only supported for 2 features, model has {model.n_features}"
        )
    if resolution < 2:
        raise BoundaryError("resolution must be at least 2")
    if data is not None and data.n_features != 2:
        raise BoundaryError(f"Data has {data.n_features} features, expected 2")

    low, high = _box(model, data)
    xs = np.linspace(low[0], high[0], resolution)
    ys = np.linspace(low[1], high[1], resolution)
    XX, YY = np.meshgrid(xs, ys)
    values = decision_values(model, np.column_stack([XX.ravel(), YY.ravel()])).reshape(XX.shape)

    dx = np.array([xs[1] - xs[0], 0.0])
    dy = np.array([0.0, ys[1] - ys[0]])
    nodes = np.stack([XX, YY], axis=-1)
    horizontal = _edge_crossings(values[:, :-1], values[:, 1:], nodes[:, :-1], dx)
    vertical = _edge_crossings(values[:-1, :], values[1:, :], nodes[:-1, :], dy)
    on_nodes = nodes[values == 0.0]
    level = np.vstack([horizontal, vertical, on_nodes])
    level = np.unique(level, axis=0) if level.size else np.empty((0, 2))

    # |f| at an interpolated point is bounded by the jump across its edge
    # plus the curvature of f along the edge.
    jumps = [np.abs(np.diff(values, axis=1)).max(), np.abs(np.diff(values, axis=0)).max()]
    span = np.array(model.scaler.maximum) - np.array(model.scaler.minimum)
    scale = np.where(span > 0.0, 2.0 / np.where(span > 0.0, span, 1.0), 0.0)
    scaled_step = float(np.max(scale * np.array([dx[0], dy[1]])))
    curvature = float(np.linalg.norm(model.W, 2))
    cell_bound = float(max(jumps) + 0.125 * curvature * scaled_step**2)

    if data is None:
        samples, labels, support = np.empty((0, 2)), np.empty(0), np.empty(0, dtype=bool)
    else:
        samples, labels, support = np.array(data.X), np.array(data.y), _support_mask(model, data)

    return BoundaryData(
        xs=xs,
        ys=ys,
        values=values,
        level_points=level,
        samples=samples,
        labels=labels,
        support=support,
        cell_bound=cell_bound,
    )


def write_boundary_csv(boundary: BoundaryData, path: Path) -> None:
    """Columns ``kind,x1,x2,decision_value,label,support``; unused cells stay empty."""

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["kind", "x1", "x2", "decision_value", "label", "support"])
        for i, y in enumerate(boundary.ys):
            for j, x in enumerate(boundary.xs):
                value = repr(float(boundary.values[i, j]))
                writer.writerow(["grid", repr(float(x)), repr(float(y)), value, "", ""])
        for x, y in boundary.level_points:
            writer.writerow(["level", repr(float(x)), repr(float(y)), "", "", ""])
        for (x, y), label, is_sv in zip(boundary.samples, boundary.labels, boundary.support):
            writer.writerow(
                ["sample", repr(float(x)), repr(float(y)), "", str(int(label)), str(int(is_sv))]
            )


def render_svg(boundary: BoundaryData, path: Path, title: Optional[str] = None) -> None:
    """Draw the zero level set, the samples and circled support vectors."""

    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError as exc:
        raise BoundaryError(
            "SVG output requires matplotlib; install the 'plot' extra (pip install qshs[plot])"
        ) from exc

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6, 6))
    try:
        ax.contour(boundary.xs, boundary.ys, boundary.values, levels=[0.0], colors="k")
        for label, marker, color in ((1.0, "+", "tab:red"), (-1.0, "o", "tab:blue")):
            points = boundary.samples[boundary.labels == label]
            if points.size:
                ax.scatter(
                    points[:, 0], points[:, 1], marker=marker, c=color, s=24, label=f"{int(label):+d}"
                )
        sv = boundary.support_points
        if sv.size:
            ax.scatter(
                sv[:, 0], sv[:, 1], s=90, facecolors="none", edgecolors="k", linewidths=1, label="SV"
            )
        ax.set_xlim(boundary.xs[0], boundary.xs[-1])
        ax.set_ylim(boundary.ys[0], boundary.ys[-1])
        ax.set_xlabel("x1")
        ax.set_ylabel("x2")
        if title:
            ax.set_title(title)
        if boundary.samples.size:
            ax.legend(loc="best")
        fig.savefig(path, format="svg", bbox_inches="tight")
    finally:
        plt.close(fig)
