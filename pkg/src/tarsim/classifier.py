"""L2-regularized binary logistic regression on sparse feature rows.

The model is retrained from scratch every review iteration, so the solver is
built for small-to-medium sparse problems and strict determinism: a
limited-memory quasi-Newton loop (history 10, Armijo backtracking) that stops
when the max-norm of the analytic gradient drops below tolerance. Same
inputs, same config, bit-identical weights.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .features import SparseMatrix


@dataclass(frozen=True)
class TrainConfig:
    C: float = 1.0
    max_iterations: int = 1000
    gradient_tolerance: float = 1e-6
    positive_class_weight: float = 1.0
    history: int = 10


@dataclass
class LogRegModel:
    weights: np.ndarray
    bias: float
    config: TrainConfig
    n_iter: int = 0


def _prepare(matrix: SparseMatrix, row_indices: Sequence[int], labels: Sequence[int], config: TrainConfig):
    rows = np.asarray(row_indices, dtype=np.int64)
    y01 = np.asarray(labels, dtype=np.int64)
    if rows.shape != y01.shape:
        raise ValueError("row_indices and labels must have the same length")
    if not (np.any(y01 == 1) and np.any(y01 == 0)):
        raise ValueError("degenerate training set: need at least one positive and one negative")
    X = matrix.csr[rows]
    y = np.where(y01 == 1, 1.0, -1.0)
    cw = np.where(y01 == 1, config.positive_class_weight, 1.0)
    return X, y, cw


def _objective_grad(theta: np.ndarray, X: sp.csr_matrix, y: np.ndarray, cw: np.ndarray, C: float):
    """Value and gradient of 0.5/C*||w||^2 + sum_i cw_i*log(1+exp(-y_i*(x_i.w + b)))."""
    w = theta[:-1]
    b = theta[-1]
    z = X @ w + b
    t = y * z
    # log(1 + exp(-t)) computed stably for both signs of t
    loss = float(np.dot(cw, np.logaddexp(0.0, -t)))
    value = 0.5 / C * float(np.dot(w, w)) + loss
    # d loss_i / d z_i = -cw_i * y_i * sigmoid(-t_i)
    gz = -cw * y * expit(-t)
    grad = np.empty_like(theta)
    grad[:-1] = w / C + X.T @ gz
    grad[-1] = float(gz.sum())
    return value, grad


def _two_loop_direction(g: np.ndarray, s_hist: list[np.ndarray], y_hist: list[np.ndarray], rho_hist: list[float]):
    q = g.copy()
    alphas: list[float] = []
    for s, yv, rho in zip(reversed(s_hist), reversed(y_hist), reversed(rho_hist)):
        a = rho * float(s @ q)
        alphas.append(a)
        q -= a * yv
    if y_hist:
        gamma = float(s_hist[-1] @ y_hist[-1]) / float(y_hist[-1] @ y_hist[-1])
    else:
        gamma = 1.0
    r = gamma * q
    for (s, yv, rho), a in zip(zip(s_hist, y_hist, rho_hist), reversed(alphas)):
        beta = rho * float(yv @ r)
        r += (a - beta) * s
    return -r


def _minimize(fun_grad, x0: np.ndarray, max_iter: int, gtol: float, history: int):
    x = np.array(x0, dtype=np.float64)
    f, g = fun_grad(x)
    s_hist: list[np.ndarray] = []
    y_hist: list[np.ndarray] = []
    rho_hist: list[float] = []
    n_iter = 0
    while n_iter < max_iter and float(np.max(np.abs(g))) > gtol:
        d = _two_loop_direction(g, s_hist, y_hist, rho_hist)
        dg = float(d @ g)
        if dg >= 0.0:
            d = -g
            dg = -float(g @ g)
        alpha = 1.0 if s_hist else min(1.0, 1.0 / max(1e-12, float(np.abs(g).sum())))
        x_new = f_new = g_new = None
        accepted = False
        for _ in range(60):
            x_new = x + alpha * d
            f_new, g_new = fun_grad(x_new)
            if f_new <= f + 1e-4 * alpha * dg:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            break  # step underflow: no further progress possible
        s = x_new - x
        yv = g_new - g
        sy = float(s @ yv)
        if sy > 1e-12 * float(np.linalg.norm(s)) * float(np.linalg.norm(yv)):
            s_hist.append(s)
            y_hist.append(yv)
            rho_hist.append(1.0 / sy)
            if len(s_hist) > history:
                s_hist.pop(0)
                y_hist.pop(0)
                rho_hist.pop(0)
        x, f, g = x_new, f_new, g_new
        n_iter += 1
    return x, f, g, n_iter


def train(
    matrix: SparseMatrix,
    row_indices: Sequence[int],
    labels: Sequence[int],
    config: TrainConfig | None = None,
    warm_start_from: LogRegModel | None = None,
) -> LogRegModel:
    """Fit the regularized logistic objective on the given rows.

    ``labels`` are 0/1 aligned with ``row_indices``. The bias term is not
    regularized. ``warm_start_from`` seeds the optimizer with a previous
    model's parameters (off by default: from-scratch retraining removes any
    path dependence between iterations).
    """
    config = config or TrainConfig()
    X, y, cw = _prepare(matrix, row_indices, labels, config)
    n_features = matrix.n_cols
    if warm_start_from is not None:
        if warm_start_from.weights.shape[0] != n_features:
            raise ValueError("warm start model has mismatched feature count")
        x0 = np.concatenate([warm_start_from.weights, [warm_start_from.bias]])
    else:
        x0 = np.zeros(n_features + 1)
    fun_grad = lambda theta: _objective_grad(theta, X, y, cw, config.C)
    theta, _, _, n_iter = _minimize(
        fun_grad, x0, config.max_iterations, config.gradient_tolerance, config.history
    )
    return LogRegModel(weights=theta[:-1], bias=float(theta[-1]), config=config, n_iter=n_iter)


def predict_proba(model: LogRegModel, matrix: SparseMatrix, row_indices: Sequence[int] | None = None) -> np.ndarray:
    """sigmoid(x_i . w + b) for the selected rows (all rows when None)."""
    if model.weights.shape[0] != matrix.n_cols:
        raise ValueError(
            f"model has {model.weights.shape[0]} features but matrix has {matrix.n_cols} columns"
        )
    X = matrix.csr if row_indices is None else matrix.csr[np.asarray(row_indices, dtype=np.int64)]
    return expit(X @ model.weights + model.bias)


def objective(
    model: LogRegModel, matrix: SparseMatrix, row_indices: Sequence[int], labels: Sequence[int],
    config: TrainConfig | None = None,
) -> float:
    """Training objective value at the model's parameters."""
    config = config or model.config
    X, y, cw = _prepare(matrix, row_indices, labels, config)
    theta = np.concatenate([model.weights, [model.bias]])
    value, _ = _objective_grad(theta, X, y, cw, config.C)
    return value


def gradient(
    model: LogRegModel, matrix: SparseMatrix, row_indices: Sequence[int], labels: Sequence[int],
    config: TrainConfig | None = None,
) -> np.ndarray:
    """Analytic gradient of the objective at the model: [d/dw..., d/db]."""
    config = config or model.config
    if model.weights.shape[0] != matrix.n_cols:
        raise ValueError("model/matrix feature count mismatch")
    X, y, cw = _prepare(matrix, row_indices, labels, config)
    theta = np.concatenate([model.weights, [model.bias]])
    _, grad = _objective_grad(theta, X, y, cw, config.C)
    return grad
