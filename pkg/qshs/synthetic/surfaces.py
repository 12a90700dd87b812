"""Canonical separating surfaces: line, parabola, circle and hyperbola."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Tuple

import numpy as np

from .base import Surface

Box = Tuple[Tuple[float, float], Tuple[float, float]]


@dataclass(frozen=True)
class LineSurface:
    """``x2 - x1``: linearly separable, the quadratic term is not needed."""

    kind: str = "line"
    box: Box = ((-1.0, 1.0), (-1.0, 1.0))

    def value(self, X: np.ndarray) -> np.ndarray:
        return X[:, 1] - X[:, 0]


@dataclass(frozen=True)
class ParabolaSurface:
    """``x2 - x1^2``; the box is shifted up so both sides have similar area."""

    kind: str = "parabola"
    box: Box = ((-1.0, 1.0), (-0.5, 1.5))

    def value(self, X: np.ndarray) -> np.ndarray:
        return X[:, 1] - X[:, 0] ** 2


@dataclass(frozen=True)
class CircleSurface:
    """``x1^2 + x2^2 - r^2``; the default radius splits the square in half."""

    kind: str = "circle"
    radius: float = math.sqrt(2.0 / math.pi)
    box: Box = ((-1.0, 1.0), (-1.0, 1.0))

    def value(self, X: np.ndarray) -> np.ndarray:
        return X[:, 0] ** 2 + X[:, 1] ** 2 - self.radius**2


@dataclass(frozen=True)
class HyperbolaSurface:
    """``x1^2 - x2^2 - d``."""

    kind: str = "hyperbola"
    offset: float = 0.1
    box: Box = ((-1.0, 1.0), (-1.0, 1.0))

    def value(self, X: np.ndarray) -> np.ndarray:
        return X[:, 0] ** 2 - X[:, 1] ** 2 - self.offset


SURFACES: Dict[str, Callable[..., Surface]] = {
    "line": LineSurface,
    "parabola": ParabolaSurface,
    "circle": CircleSurface,
    "hyperbola": HyperbolaSurface,
}


def surface_kinds() -> List[str]:
    return sorted(SURFACES)
