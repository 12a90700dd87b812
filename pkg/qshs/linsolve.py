"""Symmetric positive (semi)definite solvers for the ``[w_tilde; b]`` subproblem."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Literal, Optional

import numpy as np
from scipy import linalg
from scipy.linalg import lapack

DIRECT_RESIDUAL_FACTOR = 1e-8


class SingularSystemError(RuntimeError):
    """Raised when the Cholesky factorisation meets a non-positive pivot."""

    def __init__(self, pivot: Optional[int], message: str) -> None:
        super().__init__(message)
        self.pivot = pivot


class NumericalBreakdownError(RuntimeError):
    """Raised when conjugate gradients produce non-finite iterates."""


@dataclass(frozen=True)
class SpdSystem:
    """``(K + ridge * I) z = rhs`` with ``K`` symmetric."""

    K: np.ndarray
    rhs: np.ndarray
    ridge: float = 0.0

    def __post_init__(self) -> None:
        K = np.asarray(self.K, dtype=float)
        rhs = np.asarray(self.rhs, dtype=float)
        if K.ndim != 2 or K.shape[0] != K.shape[1]:
            raise ValueError(f"System matrix must be square, got shape {K.shape}")
        if rhs.shape != (K.shape[0],):
            raise ValueError(f"Right-hand side of shape {rhs.shape} does not match order {K.shape[0]}")
        if self.ridge < 0.0:
            raise ValueError("ridge must be nonnegative")
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "rhs", rhs)

    @property
    def order(self) -> int:
        return self.K.shape[0]

    def matvec(self, z: np.ndarray) -> np.ndarray:
        return self.K @ z + self.ridge * z

    def regularised(self) -> np.ndarray:
        if self.ridge == 0.0:
            return self.K
        return self.K + self.ridge * np.eye(self.order)

    def residual_norm(self, z: np.ndarray) -> float:
        return float(np.linalg.norm(self.matvec(z) - self.rhs))


@dataclass(frozen=True)
class LinearSolution:
    """Solution vector plus diagnostics."""

    x: np.ndarray
    method: Literal["direct", "cg"]
    iterations: int
    residual_norm: float
    converged: bool


def solve_direct(sys: SpdSystem) -> LinearSolution:
    """Cholesky solve of ``(K + ridge I) z = rhs``."""

    factor, info = lapack.dpotrf(sys.regularised(), lower=False, clean=True, overwrite_a=False)
    if info > 0:
        raise SingularSystemError(
            info, f"Matrix is not positive definite (leading minor of order {info})"
        )
    if info < 0:
        raise SingularSystemError(None, f"Illegal value in argument {-info} to dpotrf")

    x = linalg.cho_solve((factor, False), sys.rhs, check_finite=False)
    if not np.all(np.isfinite(x)):
        raise SingularSystemError(None, "Cholesky solve produced non-finite values")

    residual = sys.residual_norm(x)
    bound = DIRECT_RESIDUAL_FACTOR * (1.0 + float(np.linalg.norm(sys.rhs)))
    return LinearSolution(
        x=x,
        method="direct",
        iterations=1,
        residual_norm=residual,
        converged=residual <= bound,
    )


def solve_cg(
    sys: SpdSystem,
    tol: float = 1e-10,
    max_iter: Optional[int] = None,
    x0: Optional[np.ndarray] = None,
    callback: Optional[Callable[[int, np.ndarray], None]] = None,
) -> LinearSolution:
    """Unpreconditioned conjugate gradients.

    Stops once ``||(K + ridge I) z - rhs|| <= tol * (1 + ||rhs||)`` or after
    ``max_iter`` steps (default: the system order). ``callback(k, z)`` sees
    every iterate including the starting point.
    """

    if tol <= 0.0:
        raise ValueError("tol must be positive")
    limit = sys.order if max_iter is None else max_iter

    x = np.zeros(sys.order) if x0 is None else np.array(x0, dtype=float, copy=True)
    r = sys.rhs - sys.matvec(x)
    p = r.copy()
    rs_old = float(r @ r)
    bound = tol * (1.0 + float(np.linalg.norm(sys.rhs)))

    if callback is not None:
        callback(0, x)

    k = 0
    while np.sqrt(rs_old) > bound and k < limit:
        Ap = sys.matvec(p)
        curvature = float(p @ Ap)
        if not np.isfinite(curvature):
            raise NumericalBreakdownError(f"Non-finite curvature at CG iteration {k}")
        if curvature <= 0.0:
            # Direction in the null space of a semidefinite system.
            break
        alpha = rs_old / curvature
        x = x + alpha * p
        r = r - alpha * Ap
        rs_new = float(r @ r)
        if not np.isfinite(rs_new):
            raise NumericalBreakdownError(f"Non-finite residual at CG iteration {k}")
        p = r + (rs_new / rs_old) * p
        rs_old = rs_new
        k += 1
        if callback is not None:
            callback(k, x)

    residual = sys.residual_norm(x)
    if not np.isfinite(residual):
        raise NumericalBreakdownError("CG returned a non-finite iterate")
    return LinearSolution(
        x=x,
        method="cg",
        iterations=k,
        residual_norm=residual,
        converged=residual <= bound,
    )
