"""Constant and linear (optionally ridge-penalized) engines."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["ConstantState", "LinearState", "fit_constant", "fit_linear"]


@dataclass(frozen=True)
class ConstantState:
    mean: float

    def predict_inner(self, x: np.ndarray) -> np.ndarray:
        return np.full(x.shape[0], self.mean, dtype=np.float64)


@dataclass(frozen=True)
class LinearState:
    intercept: float
    coef: np.ndarray

    def predict_inner(self, x: np.ndarray) -> np.ndarray:
        return x @ self.coef + self.intercept


def fit_constant(y: np.ndarray) -> ConstantState:
    return ConstantState(mean=float(np.mean(y)))


def fit_linear(x: np.ndarray, y: np.ndarray, ridge: float) -> LinearState:
    """Least squares with an unpenalized intercept.

    ``ridge > 0`` minimizes ||y - b0 - X b||^2 + ridge * ||b||^2; the
    intercept comes from centering, so residuals always have mean zero.
    ``ridge = 0`` falls back to the minimum-norm least-squares solution,
    which tolerates rank-deficient (e.g. constant or duplicated)
    columns.
    """
    x_mean = x.mean(axis=0)
    y_mean = float(y.mean())
    xc = x - x_mean
    yc = y - y_mean
    if ridge > 0.0:
        gram = xc.T @ xc + ridge * np.eye(x.shape[1])
        coef = np.linalg.solve(gram, xc.T @ yc)
    else:
        coef, _, _, _ = np.linalg.lstsq(xc, yc, rcond=None)
    intercept = y_mean - float(x_mean @ coef)
    return LinearState(intercept=intercept, coef=np.ascontiguousarray(coef))
