"""Cross-validated lasso: coordinate descent over a log-spaced penalty
path, with the penalty picked by K-fold cross-validation.

The objective is (1/2n)||y - b0 - X b||^2 + lambda * ||b||_1 with an
unpenalized intercept.  Descent runs on standardized columns (centered,
unit population SD) and coefficients are reported back on the original
scale.  The path starts at lambda_max = max_j |x_j^T (y - ybar)| / n,
the smallest penalty with an all-zero solution, and descends
log-linearly to 1e-4 * lambda_max with warm starts.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .. import _kernels
from ..errors import DomainError
from ..numkit import RngStream, as_matrix, as_vector

__all__ = ["LassoState", "cv_select_lambda", "fit_lasso_cv"]

_CD_TOL = 1e-7
_CD_MAX_SWEEPS = 2000
_GRID_DECADES = 4  # lambda_max down to 1e-4 * lambda_max


@dataclass(frozen=True)
class LassoState:
    intercept: float
    coef: np.ndarray
    lambda_: float
    cv_lambdas: np.ndarray
    cv_errors: np.ndarray

    def predict_inner(self, x: np.ndarray) -> np.ndarray:
        return x @ self.coef + self.intercept


def _standardize(x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    mean = x.mean(axis=0)
    sd = x.std(axis=0)
    scale = np.where(sd > 0.0, sd, 1.0)
    xs = np.asfortranarray((x - mean) / scale)
    return xs, mean, scale


def _lambda_grid(lam_max: float, grid_size: int) -> np.ndarray:
    return np.logspace(np.log10(lam_max), np.log10(lam_max) - _GRID_DECADES, grid_size)


def _path_betas(xs: np.ndarray, yc: np.ndarray, lambdas: np.ndarray) -> np.ndarray:
    """Warm-started coefficient path on standardized data; row i holds
    the solution at lambdas[i]."""
    n, p = xs.shape
    col_nu = np.ascontiguousarray((xs * xs).sum(axis=0) / n)
    beta = np.zeros(p, dtype=np.float64)
    resid = yc.copy()
    betas = np.empty((lambdas.shape[0], p), dtype=np.float64)
    for i, lam in enumerate(lambdas):
        _kernels.lasso_cd(xs, beta, resid, float(lam), col_nu, _CD_MAX_SWEEPS, _CD_TOL)
        betas[i] = beta
    return betas


def _original_scale(beta_std, mean, scale, y_mean):
    coef = beta_std / scale
    intercept = float(y_mean - mean @ coef)
    return np.ascontiguousarray(coef), intercept


def cv_select_lambda(
    features,
    target,
    folds: int = 10,
    grid_size: int = 100,
    rng: RngStream | None = None,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Pick the lasso penalty by K-fold cross-validation.

    Returns ``(lambda, lambdas, cv_mse)`` where ``cv_mse[i]`` is the
    out-of-fold mean squared error at ``lambdas[i]`` (shared grid from
    the full data, descending).  Ties resolve to the largest penalty.
    A constant target (or all-constant features) makes every penalty
    equivalent; that returns lambda_max with a warning rather than an
    error.
    """
    x = as_matrix(features, "features")
    y = as_vector(target, "target")
    n, p = x.shape
    if y.shape[0] != n:
        raise DomainError(f"features have {n} rows but target has {y.shape[0]}")
    if p < 1:
        raise DomainError("lasso_cv needs at least one feature column")
    if folds < 2:
        raise DomainError(f"folds must be >= 2, got {folds}")
    if folds > n:
        raise DomainError(f"cannot make {folds} folds from {n} observations")
    if grid_size < 2:
        raise DomainError(f"grid_size must be >= 2, got {grid_size}")
    if rng is None:
        rng = RngStream(seed=0)

    xs, mean, scale = _standardize(x)
    y_mean = float(y.mean())
    yc = y - y_mean
    lam_max = float(np.max(np.abs(xs.T @ yc)) / n)
    if lam_max <= 0.0:
        warnings.warn(
            "target (or every feature) is constant; selecting lambda_max with "
            "all-zero coefficients",
            stacklevel=2,
        )
        mse = float(np.mean(yc * yc))
        return 0.0, np.array([0.0]), np.array([mse])

    lambdas = _lambda_grid(lam_max, grid_size)
    perm = rng.generator().permutation(n)
    chunks = np.array_split(perm, folds)
    sse = np.zeros(grid_size, dtype=np.float64)
    for held in chunks:
        mask = np.ones(n, dtype=bool)
        mask[held] = False
        x_tr, y_tr = x[mask], y[mask]
        xs_tr, mean_tr, scale_tr = _standardize(x_tr)
        ym_tr = float(y_tr.mean())
        betas = _path_betas(xs_tr, y_tr - ym_tr, lambdas)
        for i in range(grid_size):
            coef, intercept = _original_scale(betas[i], mean_tr, scale_tr, ym_tr)
            err = y[held] - (x[held] @ coef + intercept)
            sse[i] += float(err @ err)
    cv_mse = sse / n
    best = int(np.argmin(cv_mse))  # first minimum = largest penalty
    return float(lambdas[best]), lambdas, cv_mse


def fit_lasso_cv(
    x: np.ndarray, y: np.ndarray, folds: int, grid_size: int, rng: RngStream
) -> LassoState:
    lam, lambdas, cv_mse = cv_select_lambda(x, y, folds=folds, grid_size=grid_size, rng=rng)
    y_mean = float(y.mean())
    if lam <= 0.0 and lambdas.shape[0] == 1:
        # degenerate constant-target case flagged by cv_select_lambda
        return LassoState(
            intercept=y_mean,
            coef=np.zeros(x.shape[1], dtype=np.float64),
            lambda_=lam,
            cv_lambdas=lambdas,
            cv_errors=cv_mse,
        )
    xs, mean, scale = _standardize(x)
    stop = int(np.argmin(np.abs(lambdas - lam))) + 1
    betas = _path_betas(xs, y - y_mean, lambdas[:stop])
    coef, intercept = _original_scale(betas[-1], mean, scale, y_mean)
    return LassoState(
        intercept=intercept,
        coef=coef,
        lambda_=lam,
        cv_lambdas=lambdas,
        cv_errors=cv_mse,
    )
