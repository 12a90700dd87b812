"""Working-set ADMM for the 0-1 loss quadratic-surface SVM.

Unknowns are the half-vector ``w_tilde`` of ``W``, the linear weights ``b``,
the offset ``c``, slacks ``u`` and multipliers ``lam``. With
``A = diag(y) S``, ``B = diag(y) X`` and ``K = [A B]`` the model solves::

    min 0.5 * sum_i ||M_i w_tilde + b||^2 + C ||u_+||_0
    s.t. u + K [w_tilde; b] + c y = 1

One iteration updates the working set ``T``, then ``u``, ``[w_tilde; b]``,
``c`` and ``lam`` in that order. Iteration stops when the largest scaled
P-stationarity residual drops below ``tol`` or after ``max_iter`` iterations.

The ``[w_tilde; b]`` system only sees rows in ``T``. With
``offset_step="working_set"`` (the default) the offset does the same; with
``"full"`` it averages over all N rows, whose frozen off-set slacks make ``c``
crawl once ``T`` holds a handful of support vectors.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import structlog

from .config import SolverConfig
from .data import Dataset, apply_scaler, fit_scaler
from .linsolve import (
    LinearSolution,
    NumericalBreakdownError,
    SingularSystemError,
    SpdSystem,
    solve_cg,
    solve_direct,
)
from .logging import get_logger
from .model import QuadraticSurfaceModel, from_solution
from .prox01 import ProxParams, prox, working_band_mask, zero_one_loss_count
from .quadmap import half_length, mat_op, qvec_rows, stacked_mat_op, system_order

RIDGE_SCALE = 1e-10


class SolverError(RuntimeError):
    """Raised when a subproblem solve fails; carries the iteration index."""

    def __init__(self, iteration: int, message: str) -> None:
        super().__init__(f"iteration {iteration}: {message}")
        self.iteration = iteration
        self.detail = message


@dataclass(frozen=True, eq=False)
class DesignMatrices:
    """Per-dataset matrices shared by every iteration (and every thread)."""

    X: np.ndarray
    y: np.ndarray
    S: np.ndarray
    A: np.ndarray
    B: np.ndarray
    K: np.ndarray
    G: np.ndarray
    # Per-sample sparse ``Mat(x_i)`` operators.
    M: Tuple[Any, ...]

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def order(self) -> int:
        return self.G.shape[0]

    def default_ridge(self) -> float:
        return RIDGE_SCALE * (1.0 + float(np.trace(self.G)) / self.order)


@dataclass(frozen=True, eq=False)
class SolverState:
    """Iterate ``(w_tilde, b, c, u, lam)`` with its working set and counter."""

    w_tilde: np.ndarray
    b: np.ndarray
    c: float
    u: np.ndarray
    lam: np.ndarray
    T: np.ndarray
    k: int = 0

    @classmethod
    def zeros(cls, N: int, n: int) -> "SolverState":
        return cls(
            w_tilde=np.zeros(half_length(n)),
            b=np.zeros(n),
            c=0.0,
            u=np.zeros(N),
            lam=np.zeros(N),
            T=np.empty(0, dtype=int),
        )

    @property
    def z(self) -> np.ndarray:
        """Stacked ``[w_tilde; b]``."""

        return np.concatenate([self.w_tilde, self.b])


@dataclass(frozen=True)
class Residuals:
    """Scaled P-stationarity residuals; the largest is the stopping statistic."""

    theta1: float
    theta2: float
    theta3: float
    theta4: float

    @property
    def max(self) -> float:
        return max(self.theta1, self.theta2, self.theta3, self.theta4)

    def as_dict(self) -> Dict[str, float]:
        return {
            "theta1": self.theta1,
            "theta2": self.theta2,
            "theta3": self.theta3,
            "theta4": self.theta4,
        }


@dataclass(frozen=True)
class IterationRecord:
    k: int
    working_set_size: int
    branch: str
    cg_iterations: int
    max_residual: float


@dataclass(eq=False)
class FitReport:
    """Outcome of one solver run."""

    converged: bool
    iterations: int
    residuals: Residuals
    working_set: Tuple[int, ...]
    support_vectors: Tuple[int, ...]
    lam: np.ndarray
    u: np.ndarray
    objective: float
    support_margins: np.ndarray
    cost_estimate: float
    elapsed_seconds: float
    state: SolverState
    history: List[IterationRecord] = field(default_factory=list)

    @property
    def n_support_vectors(self) -> int:
        return len(self.support_vectors)

    def summary(self) -> Dict[str, Any]:
        """JSON-friendly digest stored in model metadata."""

        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "residuals": self.residuals.as_dict(),
            "objective": self.objective,
            "n_support_vectors": self.n_support_vectors,
            "support_vectors": list(self.support_vectors),
            "cost_estimate": self.cost_estimate,
            "elapsed_seconds": self.elapsed_seconds,
        }


# ----------------------------------------------------------------------
# Building blocks
# ----------------------------------------------------------------------
def build_design(data: Dataset) -> DesignMatrices:
    """Precompute ``S``, ``A``, ``B``, ``K`` and the Gram matrix ``G``."""

    data.validate_for_training()
    X = np.array(data.X, dtype=float)
    y = np.array(data.y, dtype=float)

    S = qvec_rows(X)
    A = y[:, None] * S
    B = y[:, None] * X
    stacked = stacked_mat_op(X)
    G = (stacked.T @ stacked).toarray()
    G = 0.5 * (G + G.T)

    arrays = {"X": X, "y": y, "S": S, "A": A, "B": B, "K": np.hstack([A, B]), "G": G}
    for array in arrays.values():
        array.setflags(write=False)
    return DesignMatrices(**arrays, M=tuple(mat_op(row) for row in X))


def _prox_params(cfg: SolverConfig) -> ProxParams:
    return ProxParams.from_sigma(cfg.sigma, cfg.C)


def _margins(state: SolverState, d: DesignMatrices) -> np.ndarray:
    """``A w_tilde + B b + c y``, i.e. ``y_i f(x_i)`` for every sample."""

    return d.A @ state.w_tilde + d.B @ state.b + state.c * d.y


def compute_v(state: SolverState, d: DesignMatrices, cfg: SolverConfig) -> np.ndarray:
    """``v = 1 - A w_tilde - B b - c y - lam / sigma``."""

    return 1.0 - d.A @ state.w_tilde - d.B @ state.b - state.c * d.y - state.lam / cfg.sigma


def update_working_set(v: np.ndarray, cfg: SolverConfig) -> np.ndarray:
    """Indices with ``v_i`` in ``(0, sqrt(2 C / sigma)]``."""

    return np.flatnonzero(working_band_mask(v, _prox_params(cfg)))


def update_u(v: np.ndarray, T: np.ndarray) -> np.ndarray:
    u = np.array(v, dtype=float, copy=True)
    u[T] = 0.0
    return u


def _solve_reduced(
    state: SolverState,
    d: DesignMatrices,
    cfg: SolverConfig,
    T: np.ndarray,
) -> LinearSolution:
    rhs_vector = -(state.u + state.c * d.y - 1.0 + state.lam / cfg.sigma)
    K_T = d.K[T]
    lhs = d.G + cfg.sigma * (K_T.T @ K_T)
    rhs = cfg.sigma * (K_T.T @ rhs_vector[T])
    ridge = d.default_ridge() if cfg.ridge is None else cfg.ridge
    system = SpdSystem(K=lhs, rhs=rhs, ridge=ridge)

    branch = cfg.linear_solver
    if branch == "auto":
        branch = "direct" if d.order <= T.size else "cg"
    if branch == "direct":
        return solve_direct(system)
    return solve_cg(
        system,
        tol=cfg.cg_tol,
        max_iter=cfg.cg_max_iter or d.order,
        x0=state.z,
    )


def update_wb(
    state: SolverState,
    d: DesignMatrices,
    cfg: SolverConfig,
    T: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray]:
    """Solve ``(G + sigma K_T^T K_T) z = sigma K_T^T d_T`` for ``z = [w_tilde; b]``.

    ``state.u`` must already hold the new slacks. Uses Cholesky when the
    working set is at least as large as the system order, CG otherwise.
    """

    solution = _solve_reduced(state, d, cfg, T)
    p = half_length(d.n_features)
    return solution.x[:p], solution.x[p:]


def update_c(state: SolverState, d: DesignMatrices, cfg: SolverConfig) -> float:
    """``c = -y^T (A w_tilde + B b - 1 + u + lam / sigma) / N``."""

    inner = d.A @ state.w_tilde + d.B @ state.b - 1.0 + state.u + state.lam / cfg.sigma
    return float(-(d.y @ inner) / d.n_samples)


def update_c_working_set(
    state: SolverState,
    d: DesignMatrices,
    cfg: SolverConfig,
    T: np.ndarray,
) -> float:
    """Offset minimising jointly over ``c`` and the off-set slacks ``u_Tbar``.

    Rows outside ``T`` have unconstrained slacks, so they drop out the same
    way they drop out of the ``[w_tilde; b]`` system::

        c = -y_T^T (A_T w_tilde + B_T b - 1 + lam_T / sigma) / |T|

    Falls back to :func:`update_c` when ``T`` is empty. Fixed points are the
    same as with :func:`update_c`; both require ``y_T^T lam_T = 0`` there.
    """

    if T.size == 0:
        return update_c(state, d, cfg)
    inner = d.A[T] @ state.w_tilde + d.B[T] @ state.b - 1.0 + state.lam[T] / cfg.sigma
    return float(-(d.y[T] @ inner) / T.size)


def update_lambda(
    state: SolverState,
    d: DesignMatrices,
    cfg: SolverConfig,
    T: np.ndarray,
) -> np.ndarray:
    """Dual ascent on ``T``; multipliers off the working set are reset to zero."""

    constraint = state.u - 1.0 + _margins(state, d)
    lam = np.zeros(d.n_samples)
    lam[T] = state.lam[T] + cfg.eta * cfg.sigma * constraint[T]
    return lam


def residuals(state: SolverState, d: DesignMatrices, cfg: SolverConfig) -> Residuals:
    """P-stationarity residuals of ``state`` relative to its working set."""

    T = state.T
    z = state.z
    lam_T = state.lam[T]
    stationarity = d.G @ z + d.K[T].T @ lam_T
    theta1 = float(np.linalg.norm(stationarity) / (1.0 + np.linalg.norm(z)))
    theta2 = float(abs(d.y[T] @ lam_T) / (1.0 + T.size))
    feasibility = state.u - 1.0 + _margins(state, d)
    theta3 = float(np.linalg.norm(feasibility) / np.sqrt(d.n_samples))
    params = _prox_params(cfg)
    fixed_point = state.u - prox(state.u - params.gamma * state.lam, params)
    theta4 = float(np.linalg.norm(fixed_point) / (1.0 + np.linalg.norm(state.u)))
    return Residuals(theta1, theta2, theta3, theta4)


def objective_value(state: SolverState, d: DesignMatrices, cfg: SolverConfig) -> float:
    """Training objective at the feasible slacks ``1 - y f(x)``."""

    z = state.z
    slack = 1.0 - _margins(state, d)
    return float(0.5 * z @ d.G @ z + cfg.C * zero_one_loss_count(slack))


def iteration_cost(N: int, n: int, t: int, q: int) -> float:
    """Operation-count estimate ``N m + m^2 max(t, q)``, ``m = (n^2+3n)/2``."""

    m = system_order(n)
    return float(N * m + m * m * max(t, q))


def dual_weights(
    report: "FitReport",
    d: DesignMatrices,
    ridge: Optional[float] = None,
) -> np.ndarray:
    """``[w_tilde; b]`` recovered from the multipliers: ``-(G + ridge I)^-1 K_T^T lam_T``."""

    T = np.asarray(report.working_set, dtype=int)
    ridge = d.default_ridge() if ridge is None else ridge
    rhs = -(d.K[T].T @ report.lam[T])
    return solve_direct(SpdSystem(K=np.array(d.G), rhs=rhs, ridge=ridge)).x


# ----------------------------------------------------------------------
# Driver
# ----------------------------------------------------------------------
def iterate(
    state: SolverState,
    d: DesignMatrices,
    cfg: SolverConfig,
) -> Tuple[SolverState, LinearSolution]:
    """One full pass: ``T``, ``u``, ``[w_tilde; b]``, ``c``, ``lam``."""

    v = compute_v(state, d, cfg)
    T = update_working_set(v, cfg)
    state = replace(state, u=update_u(v, T), T=T)

    try:
        solution = _solve_reduced(state, d, cfg, T)
    except (SingularSystemError, NumericalBreakdownError) as exc:
        raise SolverError(state.k, str(exc)) from exc
    p = half_length(d.n_features)
    state = replace(state, w_tilde=solution.x[:p], b=solution.x[p:])

    if cfg.offset_step == "working_set":
        c = update_c_working_set(state, d, cfg, T)
    else:
        c = update_c(state, d, cfg)
    state = replace(state, c=c)
    state = replace(state, lam=update_lambda(state, d, cfg, T), k=state.k + 1)
    return state, solution


def solve(
    d: DesignMatrices,
    cfg: SolverConfig,
    *,
    logger: Optional[structlog.stdlib.BoundLogger] = None,
) -> FitReport:
    """Run the ADMM iterations on prepared design matrices."""

    log = (logger or get_logger("qshs.admm")).bind(
        N=d.n_samples, n=d.n_features, C=cfg.C, sigma=cfg.sigma
    )
    started = time.perf_counter()
    state = SolverState.zeros(d.n_samples, d.n_features)
    res = residuals(state, d, cfg)
    converged = False
    history: List[IterationRecord] = []
    cost = 0.0

    log.debug("admm.start", max_iter=cfg.max_iter, tol=cfg.tol, order=d.order)
    for _ in range(cfg.max_iter):
        state, solution = iterate(state, d, cfg)
        res = residuals(state, d, cfg)
        cg_iterations = solution.iterations if solution.method == "cg" else 0
        cost += iteration_cost(d.n_samples, d.n_features, int(state.T.size), cg_iterations)

        if cfg.record_history:
            history.append(
                IterationRecord(
                    k=state.k,
                    working_set_size=int(state.T.size),
                    branch=solution.method,
                    cg_iterations=cg_iterations,
                    max_residual=res.max,
                )
            )
        if solution.method == "cg" and not solution.converged:
            log.debug("linsolve.cg_max_iter", k=state.k, residual=solution.residual_norm)
        log.debug(
            "admm.iteration",
            k=state.k,
            working_set=int(state.T.size),
            branch=solution.method,
            cg_iterations=cg_iterations,
            max_residual=res.max,
        )
        if res.max < cfg.tol:
            converged = True
            break

    elapsed = time.perf_counter() - started
    support = np.flatnonzero(state.lam != 0.0)
    if converged:
        log.info("admm.converged", iterations=state.k, max_residual=res.max, nsv=int(support.size))
    else:
        log.warning("admm.max_iter_reached", iterations=state.k, max_residual=res.max)

    return FitReport(
        converged=converged,
        iterations=state.k,
        residuals=res,
        working_set=tuple(int(i) for i in state.T),
        support_vectors=tuple(int(i) for i in support),
        lam=state.lam,
        u=state.u,
        objective=objective_value(state, d, cfg),
        support_margins=_margins(state, d)[support],
        cost_estimate=cost,
        elapsed_seconds=elapsed,
        state=state,
        history=history,
    )


def fit(
    data: Dataset,
    cfg: SolverConfig,
    *,
    logger: Optional[structlog.stdlib.BoundLogger] = None,
) -> Tuple[QuadraticSurfaceModel, FitReport]:
    """Scale ``data`` to ``[-1, 1]``, run the solver and package the model.

    A run that hits ``max_iter`` still returns the last iterate with
    ``report.converged`` set to ``False``.
    """

    data.validate_for_training()
    scaler = fit_scaler(data.X)
    scaled = Dataset(
        X=apply_scaler(scaler, data.X),
        y=data.y,
        name=data.name,
        feature_names=data.feature_names,
        metadata=data.metadata,
    )
    design = build_design(scaled)
    report = solve(design, cfg, logger=logger)
    meta = {
        "dataset": data.name,
        "n_samples": data.n_samples,
        "solver": cfg.model_dump(mode="json"),
        "report": report.summary(),
    }
    model = from_solution(report.state.w_tilde, report.state.b, report.state.c, scaler, meta)
    return model, report
