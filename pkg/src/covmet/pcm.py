"""Projected covariance measure test.

Where the GCM needs one regression per candidate column, this test
learns a single direction.  Half the data (D2) estimates

    ghat : Y ~ (X, Z),    mhat : Y ~ Z,    vhat : (Y - ghat)^2 ~ (X, Z)

and forms the projection fhat = (ghat - mhat) / max(vhat, floor).  On
the other half (D1) it computes eps = Y - fitted(Y ~ Z) and
zeta = fhat(X, Z) - fitted(fhat(X, Z) ~ Z), and the split statistic

    T_k = (1/sqrt(n1)) sum eps_i zeta_i
          / sqrt( mean(eps^2 zeta^2) - mean(eps zeta)^2 ).

Under conditional mean independence T_k is asymptotically standard
normal; under the alternative its location is positive, so the test is
one-sided.  K independent splits are averaged (T-bar) and compared to
N(0, 1), which is conservative because the summands are positively
correlated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import DegenerateResidualsError, DomainError
from .numkit import RngStream, as_matrix, as_vector, normal_sf
from .parallel import ordered_map
from .regression import RegressorSpec, engine_echo, fit_block, predict, residuals

__all__ = [
    "PcmEngines",
    "PcmResult",
    "PcmSplit",
    "SplitPlan",
    "make_split_plan",
    "pcm_single",
    "pcm_test",
]

_FLOOR_ABS = 1e-12
_FLOOR_FRACTION = 0.01
_ZERO_ZETA_REL = 1e-12


@dataclass(frozen=True)
class SplitPlan:
    """A reproducible partition of observation indices.

    ``d1`` indexes the testing half (it receives the extra observation
    when n is odd, favoring the statistic's average), ``d2`` the
    direction-learning half.
    """

    n: int
    d1: np.ndarray
    d2: np.ndarray
    split_index: int = 0

    def __post_init__(self):
        merged = np.sort(np.concatenate([self.d1, self.d2]))
        if not np.array_equal(merged, np.arange(self.n)):
            raise DomainError("split halves must partition range(n) exactly")
        if self.d1.shape[0] < self.d2.shape[0]:
            raise DomainError("D1 must receive the extra observation on odd n")


def make_split_plan(n: int, rng: RngStream, split_index: int = 0) -> SplitPlan:
    """Randomly partition n observations; D1 gets ceil(n/2) of them."""
    if n < 2:
        raise DomainError(f"cannot split {n} observations into two halves")
    perm = rng.generator().permutation(n)
    n1 = (n + 1) // 2
    return SplitPlan(
        n=n,
        d1=np.ascontiguousarray(perm[:n1]),
        d2=np.ascontiguousarray(perm[n1:]),
        split_index=split_index,
    )


@dataclass(frozen=True)
class PcmEngines:
    """The five regression slots of a single split, each a RegressorSpec
    or a custom engine object.

    ``bernoulli_variance`` replaces the fitted vhat by the analytic
    ghat(1 - ghat) when the response is binary 0/1.
    """

    g: Any
    m: Any
    v: Any
    d1_yz: Any
    d1_fz: Any
    bernoulli_variance: bool = False

    @classmethod
    def uniform(cls, spec, bernoulli_variance: bool = False) -> "PcmEngines":
        return cls(g=spec, m=spec, v=spec, d1_yz=spec, d1_fz=spec,
                   bernoulli_variance=bernoulli_variance)

    @classmethod
    def defaults(cls) -> "PcmEngines":
        return cls.uniform(RegressorSpec("random_forest"))

    def regressions_per_split(self) -> int:
        return 4 if self.bernoulli_variance else 5

    def echo(self) -> dict:
        return {
            "g": engine_echo(self.g),
            "m": engine_echo(self.m),
            "v": engine_echo(self.v) if not self.bernoulli_variance else "bernoulli",
            "d1_yz": engine_echo(self.d1_yz),
            "d1_fz": engine_echo(self.d1_fz),
        }


@dataclass(frozen=True)
class PcmSplit:
    """One split's statistic with its diagnostics: the numerator
    estimates sqrt(n1) times the covariance the test targets, and the
    null-projection flag records a fhat that carried no direction."""

    statistic: float
    numerator: float
    variance: float
    floor_activations: int
    null_projection: bool
    n1: int
    n2: int
    mse: dict[str, float]


@dataclass(frozen=True)
class PcmResult:
    statistics: np.ndarray
    statistic_avg: float
    p: float
    K: int
    numerators: np.ndarray
    floor_activations: int
    null_projections: int
    n: int
    regressions: int
    engines: dict
    splits: tuple[PcmSplit, ...] = field(repr=False, default=())

    def to_json_dict(self) -> dict:
        return {
            "test": "pcm",
            "K": self.K,
            "statistics": self.statistics.tolist(),
            "statistic_avg": self.statistic_avg,
            "p": self.p,
            "floor_activations": self.floor_activations,
            "engines": self.engines,
        }


def _as_blocks(y, X, Z):
    y = as_vector(y, "y")
    X = as_matrix(X, "X")
    n = y.shape[0]
    Z = np.empty((n, 0)) if Z is None else np.asarray(Z, dtype=np.float64)
    if Z.ndim == 1:
        Z = Z.reshape(-1, 1)
    if X.shape[0] != n or Z.shape[0] != n:
        raise DomainError("y, X, and Z must have the same number of rows")
    if Z.size and not np.all(np.isfinite(Z)):
        raise DomainError("Z contains non-finite values")
    return y, X, Z


def pcm_single(
    y, X, Z, plan: SplitPlan, engines: PcmEngines, rng: RngStream
) -> PcmSplit:
    """One split of the test; see the module docstring for the recipe.

    A numerically all-zero zeta (the learned projection is constant in
    X) yields T_k = 0 with the null-projection flag set rather than an
    error: a directionless projection is evidence for the null, not a
    failure.
    """
    y, X, Z = _as_blocks(y, X, Z)
    n = y.shape[0]
    if n < 20:
        raise DomainError(f"pcm needs at least 20 observations, got {n}")
    if plan.n != n:
        raise DomainError(f"split plan was made for n={plan.n}, data has n={n}")

    xz = np.hstack([X, Z])
    i1, i2 = plan.d1, plan.d2
    s_g, s_m, s_v, s_yz, s_fz = rng.split(5)

    if engines.bernoulli_variance and not np.all((y == 0.0) | (y == 1.0)):
        raise DomainError("bernoulli_variance requires a 0/1 response")

    g_model = fit_block(engines.g, xz[i2], y[i2], s_g)
    m_model = fit_block(engines.m, Z[i2], y[i2], s_m)
    g_resid2 = y[i2] - predict(g_model, xz[i2])
    sq2 = g_resid2 * g_resid2
    floor = max(_FLOOR_ABS, _FLOOR_FRACTION * float(np.mean(sq2)))

    g1 = predict(g_model, xz[i1])
    m1 = predict(m_model, Z[i1])
    if engines.bernoulli_variance:
        v_raw = g1 * (1.0 - g1)
        mse_v = None
    else:
        v_model = fit_block(engines.v, xz[i2], sq2, s_v)
        v_raw = predict(v_model, xz[i1])
        mse_v = float(np.mean((sq2 - predict(v_model, xz[i2])) ** 2))
    floor_activations = int(np.sum(v_raw < floor))
    fhat1 = (g1 - m1) / np.maximum(v_raw, floor)

    eps = residuals(fit_block(engines.d1_yz, Z[i1], y[i1], s_yz), Z[i1], y[i1])
    zeta = residuals(fit_block(engines.d1_fz, Z[i1], fhat1, s_fz), Z[i1], fhat1)

    n1 = i1.shape[0]
    prods = eps * zeta
    mean_prod = float(prods.mean())
    numerator = float(prods.sum() / math.sqrt(n1))
    variance = float(np.mean(prods * prods) - mean_prod * mean_prod)

    zeta_scale = max(1.0, float(np.max(np.abs(fhat1))))
    null_projection = bool(np.max(np.abs(zeta)) <= _ZERO_ZETA_REL * zeta_scale)
    if null_projection:
        statistic = 0.0
    elif variance <= 0.0:
        raise DegenerateResidualsError(
            "residual products on D1 are numerically constant; the "
            "self-normalized split statistic is undefined"
        )
    else:
        statistic = numerator / math.sqrt(variance)

    mse = {
        "g": float(np.mean(sq2)),
        "m": float(np.mean((y[i2] - predict(m_model, Z[i2])) ** 2)),
        "d1_yz": float(np.mean(eps * eps)),
        "d1_fz": float(np.mean(zeta * zeta)),
    }
    if mse_v is not None:
        mse["v"] = mse_v
    return PcmSplit(
        statistic=statistic,
        numerator=numerator,
        variance=variance,
        floor_activations=floor_activations,
        null_projection=null_projection,
        n1=n1,
        n2=i2.shape[0],
        mse=mse,
    )


def pcm_test(
    y,
    X,
    Z,
    K: int,
    engines: PcmEngines | None = None,
    rng: RngStream | None = None,
    threads: int = 1,
) -> PcmResult:
    """Average K independent splits and compare to N(0, 1), one-sided.

    Splits run as parallel tasks on child streams indexed by split, so
    results are identical at any thread count.  A failing split aborts
    the whole test, reporting which split and stream failed so the run
    is reproducible in isolation.
    """
    if K < 1:
        raise DomainError(f"K must be >= 1, got {K}")
    if rng is None:
        raise DomainError("pcm_test requires an explicit rng stream")
    engines = PcmEngines.defaults() if engines is None else engines
    y, X, Z = _as_blocks(y, X, Z)
    n = y.shape[0]
    children = rng.split(K)

    def run_split(k: int) -> PcmSplit:
        plan_stream, fit_stream = children[k].split(2)
        plan = make_split_plan(n, plan_stream, split_index=k)
        try:
            return pcm_single(y, X, Z, plan, engines, fit_stream)
        except Exception as exc:
            raise type(exc)(
                f"split {k} (stream {children[k].stream}) failed: {exc}"
            ) from exc

    splits = ordered_map(run_split, range(K), threads=threads)
    stats = np.array([s.statistic for s in splits])
    avg = float(stats.mean())
    return PcmResult(
        statistics=stats,
        statistic_avg=avg,
        p=normal_sf(avg),
        K=K,
        numerators=np.array([s.numerator for s in splits]),
        floor_activations=int(sum(s.floor_activations for s in splits)),
        null_projections=int(sum(s.null_projection for s in splits)),
        n=n,
        regressions=K * engines.regressions_per_split(),
        engines=engines.echo(),
        splits=tuple(splits),
    )
