"""Generalised covariance measure test.

The null hypothesis is that the expected product of the two regression
errors, eps = Y - E[Y|Z] and xi_j = X_j - E[X_j|Z], is zero for every
candidate coordinate j.  With fitted residuals the statistic is

    L     = (1/n) sum_i eps_i xi_i                       (d-vector)
    Sigma = (1/n) sum_i eps_i^2 xi_i xi_i^T  -  L L^T    (d x d)
    T     = n * || Sigma^{-1/2} L ||^2,

with Sigma inverted by pseudo-inverse square root so duplicated or
constant candidates reduce the degrees of freedom instead of blowing
up.  T is compared to a chi-square with df = rank(Sigma); the test is
inherently two-sided.  For d = 1 this is exactly the squared
standardized mean of the residual products.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from .errors import DegenerateResidualsError, DomainError
from .numkit import RngStream, as_matrix, as_vector, chi2_sf, sym_pinv_sqrt
from .parallel import ordered_map
from .regression import engine_echo, fit_block, residuals

__all__ = ["GcmResult", "gcm_statistic", "gcm_test"]


@dataclass(frozen=True)
class GcmResult:
    """Statistic, degrees of freedom, and p-value of one GCM test, plus
    the ingredients (L, Sigma, per-coordinate residual correlations)
    and fit diagnostics needed to judge whether the regressions were
    predictive enough to trust it."""

    statistic: float
    df: int
    p: float
    n: int
    d: int
    L: np.ndarray
    Sigma: np.ndarray
    residual_correlations: np.ndarray
    regressions: int = 0
    diagnostics: dict[str, Any] = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "test": "gcm",
            "statistic": self.statistic,
            "df": self.df,
            "p": self.p,
            "d": self.d,
            "n": self.n,
            "regressions": {
                "count": self.regressions,
                **{k: v for k, v in self.diagnostics.items() if k == "engines"},
            },
            "diagnostics": {
                "residual_correlations": self.residual_correlations.tolist(),
                **{k: v for k, v in self.diagnostics.items() if k != "engines"},
            },
        }


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    am = a - a.mean()
    bm = b - b.mean()
    denom = np.sqrt(float(am @ am) * float(bm @ bm))
    if denom <= 0.0:
        return 0.0
    return float(am @ bm) / denom


def gcm_statistic(eps, xi, rel_tol: float = 1e-10) -> GcmResult:
    """Compute the test from already-formed residuals.

    ``eps`` has length n; ``xi`` is n x d (a vector is treated as one
    column).  Raises a degenerate-residuals error when Sigma is
    numerically zero in every direction, i.e. all residual products are
    constant; reporting p = 1 silently would hide a broken regression.
    """
    eps = as_vector(eps, "eps")
    xi = as_matrix(xi, "xi")
    n, d = xi.shape
    if eps.shape[0] != n:
        raise DomainError(f"eps has length {eps.shape[0]} but xi has {n} rows")
    if n < 2:
        raise DomainError(f"need at least 2 observations, got {n}")

    prods = eps[:, None] * xi
    L = prods.mean(axis=0)
    sigma = prods.T @ prods / n - np.outer(L, L)
    sigma = 0.5 * (sigma + sigma.T)  # exact symmetry against fp drift
    root, rank = sym_pinv_sqrt(sigma, rel_tol=rel_tol)
    if rank == 0:
        raise DegenerateResidualsError(
            "all residual products are numerically constant, so the "
            "normalized statistic is undefined; use a less flexible "
            "regression (exact interpolation leaves zero residuals) or "
            "check for constant candidate columns"
        )
    statistic = float(n * np.sum((root @ L) ** 2))
    p = chi2_sf(statistic, rank)
    corr = np.array([_pearson(eps, xi[:, j]) for j in range(d)])
    return GcmResult(
        statistic=statistic, df=rank, p=p, n=n, d=d,
        L=L, Sigma=sigma, residual_correlations=corr,
    )


def gcm_test(
    y,
    X,
    Z,
    reg_yz,
    reg_xz,
    rng: RngStream,
    rel_tol: float = 1e-10,
    threads: int = 1,
) -> GcmResult:
    """Full test: regress Y on Z and each candidate column on Z, then
    hand the residuals to gcm_statistic.

    The d + 1 regressions are independent tasks on child streams
    indexed by position, so thread count never changes the result.  An
    empty Z (zero columns) means regressing on nothing: each fit
    degrades to the constant engine and the test reduces to one of
    marginal covariance.
    """
    y = as_vector(y, "y")
    X = as_matrix(X, "X")
    n, d = X.shape
    Z = np.empty((n, 0)) if Z is None else np.asarray(Z, dtype=np.float64)
    if Z.ndim == 1:
        Z = Z.reshape(-1, 1)
    if Z.shape[0] != n or y.shape[0] != n:
        raise DomainError("y, X, and Z must have the same number of rows")
    if Z.size and not np.all(np.isfinite(Z)):
        raise DomainError("Z contains non-finite values")
    if n < 10:
        raise DomainError(f"gcm_test needs n >= 10 observations, got {n}")

    streams = rng.split(d + 1)
    tasks = [(reg_yz, Z, y)] + [(reg_xz, Z, X[:, j]) for j in range(d)]

    def fit_one(i: int) -> np.ndarray:
        spec, feats, target = tasks[i]
        model = fit_block(spec, feats, target, streams[i])
        return residuals(model, feats, target)

    resids = ordered_map(fit_one, range(d + 1), threads=threads)
    eps = resids[0]
    xi = np.column_stack(resids[1:])
    result = gcm_statistic(eps, xi, rel_tol=rel_tol)
    diagnostics = {
        "mse_yz": float(np.mean(eps * eps)),
        "mse_xz": [float(np.mean(r * r)) for r in resids[1:]],
        "engines": {"yz": engine_echo(reg_yz), "xz": engine_echo(reg_xz)},
    }
    return replace(result, regressions=d + 1, diagnostics=diagnostics)
