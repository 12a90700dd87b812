"""Base interfaces for synthetic two-dimensional datasets."""

from __future__ import annotations

from typing import Protocol, Tuple

import numpy as np


class Surface(Protocol):
    """A canonical quadratic whose sign labels points in a sampling box."""

    kind: str
    # ((x1_min, x1_max), (x2_min, x2_max))
    box: Tuple[Tuple[float, float], Tuple[float, float]]

    def value(self, X: np.ndarray) -> np.ndarray:
        """Surface value for every row of ``X`` (shape ``(N, 2)``)."""
