r"""Proximal operator of the 0-1 loss.

For ``gamma > 0`` and ``C > 0`` the scalar problem

.. math::

    \operatorname{prox}(v) = \arg\min_u \; C \cdot 1[u > 0] + \frac{1}{2\gamma}(u - v)^2

has the closed form ``0`` when ``0 < v <= sqrt(2 gamma C)`` and ``v`` otherwise.
The interval is half-open: ``v == sqrt(2 gamma C)`` maps to zero and ``v == 0``
is returned unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ProxParams:
    """Step ``gamma`` and penalty ``C`` of the 0-1 loss proximal operator."""

    gamma: float
    C: float

    def __post_init__(self) -> None:
        if not (self.gamma > 0.0 and self.C > 0.0):
            raise ValueError(f"gamma and C must be positive, got gamma={self.gamma}, C={self.C}")
        if not math.isfinite(self.threshold):
            raise ValueError("sqrt(2 * gamma * C) must be finite")

    @classmethod
    def from_sigma(cls, sigma: float, C: float) -> "ProxParams":
        """Parameters used by the ADMM slack update (gamma = 1 / sigma)."""

        return cls(gamma=1.0 / sigma, C=C)

    @property
    def threshold(self) -> float:
        return math.sqrt(2.0 * self.gamma * self.C)


def zero_one_loss(t: float) -> int:
    """``1`` if ``t > 0`` else ``0``; call sites pass ``1 - y f(x)``."""

    return 1 if t > 0 else 0


def zero_one_loss_count(t) -> int:
    """Number of strictly positive entries, i.e. ``||t_+||_0``."""

    return int(np.count_nonzero(np.asarray(t, dtype=float) > 0.0))


def working_band_mask(v, p: ProxParams) -> np.ndarray:
    """Boolean mask of entries in ``(0, sqrt(2 gamma C)]``."""

    values = np.asarray(v, dtype=float)
    return (values > 0.0) & (values <= p.threshold)


def in_working_band(v_i: float, p: ProxParams) -> bool:
    """Whether the prox zeroes ``v_i``."""

    return bool(0.0 < v_i <= p.threshold)


def prox(v, p: ProxParams) -> np.ndarray:
    """Componentwise proximal operator of ``C * ||(.)_+||_0`` with step ``gamma``."""

    values = np.array(v, dtype=float, copy=True, ndmin=1)
    values[working_band_mask(values, p)] = 0.0
    return values


def prox_objective(u, v, p: ProxParams) -> np.ndarray:
    """Scalar objective ``C 1[u>0] + (u-v)^2 / (2 gamma)``, broadcast over ``u``."""

    u_arr = np.asarray(u, dtype=float)
    return p.C * (u_arr > 0.0) + (u_arr - v) ** 2 / (2.0 * p.gamma)
