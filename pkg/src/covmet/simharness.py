"""Monte-Carlo harness: a catalog of data-generating processes with
documented null status, plus calibration, power, and timing drivers.

Catalog entries (``CATALOG`` lists them) and their analytic status:

  * ``linear-null``            Y = Z b + e,  X_j = Z g_j + u_j.
                               Y and X share only Z, so Y _||_ X | Z.
  * ``gaussian-null``          Y = s + e, X_j = s + u_j with s a fixed
                               linear score of Z; conditional on Z both
                               are independent noise.  Null.
  * ``nonlinear-null``         Y = 1 + sin(2s) + e, X_j = tanh(s) + u_j;
                               same argument, nonlinear links.  Null.
  * ``partially-linear``       Y = theta X + sin(2s) + e, X = 0.8 s + u.
                               Null if and only if theta = 0.
  * ``quadratic-null-for-gcm`` Y = X^2 + e with X, Z independent.  NOT a
                               conditional-independence null, but the
                               population residual-product covariance
                               E[(X^2 - 1) X] vanishes, so it sits in
                               the GCM's blind spot by construction.
  * ``fig2``                   Y = (1 + sin(3 X^2)) (1 + Z^3) + e with
                               X, Z independent Uniform(-1, 1) and
                               e ~ N(0, 0.25^2).  Alternative; the X
                               factor is even in X, which also blinds
                               the GCM.

Noise variables are standard normal scaled by ``noise_y`` / ``noise_x``
params; every draw order is fixed, so data are reproducible from the
DgpSpec alone.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Mapping

import numpy as np

from .data import Dataset
from .errors import DomainError
from .multiplicity import TestConfig
from .numkit import RngStream
from .parallel import ordered_map

__all__ = [
    "CATALOG",
    "DgpSpec",
    "ExperimentResult",
    "generate",
    "run_calibration",
    "run_power",
    "run_timing",
    "two_modality_fixture",
]


@dataclass(frozen=True)
class DgpSpec:
    """A catalog entry instantiated with sizes, parameter slots, and a
    random stream."""

    name: str
    n: int
    d_x: int = 1
    d_z: int = 1
    params: Mapping[str, float] = field(default_factory=dict)
    rng: RngStream | None = None

    def __post_init__(self):
        if self.name not in _ENTRIES:
            raise DomainError(
                f"unknown DGP {self.name!r}; catalog: {sorted(_ENTRIES)}"
            )
        if self.n < 1:
            raise DomainError(f"n must be >= 1, got {self.n}")
        if self.d_x < 1 or self.d_z < 1:
            raise DomainError("d_x and d_z must be >= 1")
        entry = _ENTRIES[self.name]
        merged = dict(entry.defaults)
        unknown = set(self.params) - set(merged)
        if unknown:
            raise DomainError(
                f"unknown params for '{self.name}': {sorted(unknown)}; "
                f"valid: {sorted(merged)}"
            )
        merged.update({k: float(v) for k, v in self.params.items()})
        object.__setattr__(self, "params", merged)

    def is_ci_null(self) -> bool:
        return _ENTRIES[self.name].ci_null(self.params)

    def is_gcm_blind_null(self) -> bool:
        return _ENTRIES[self.name].gcm_null(self.params)

    def echo(self) -> dict:
        return {
            "name": self.name, "n": self.n, "d_x": self.d_x, "d_z": self.d_z,
            "params": dict(self.params),
        }


@dataclass(frozen=True)
class _Entry:
    sampler: Callable
    defaults: dict[str, float]
    ci_null: Callable[[Mapping[str, float]], bool]
    gcm_null: Callable[[Mapping[str, float]], bool]


def _score_weights(d_z: int) -> np.ndarray:
    return np.full(d_z, 1.0 / np.sqrt(d_z))


def _sample_linear_null(spec: DgpSpec, gen: np.random.Generator):
    n, d_x, d_z = spec.n, spec.d_x, spec.d_z
    z = gen.standard_normal((n, d_z))
    beta = np.array([(-0.5) ** k for k in range(d_z)])
    x = np.empty((n, d_x))
    for j in range(d_x):
        gamma = np.array([(-0.5) ** ((j + k) % d_z) for k in range(d_z)])
        x[:, j] = z @ gamma + spec.params["noise_x"] * gen.standard_normal(n)
    y = z @ beta + spec.params["noise_y"] * gen.standard_normal(n)
    return y, x, z


def _sample_gaussian_null(spec: DgpSpec, gen: np.random.Generator):
    n, d_x, d_z = spec.n, spec.d_x, spec.d_z
    z = gen.standard_normal((n, d_z))
    s = z @ _score_weights(d_z)
    x = s[:, None] + spec.params["noise_x"] * gen.standard_normal((n, d_x))
    y = s + spec.params["noise_y"] * gen.standard_normal(n)
    return y, x, z


def _sample_nonlinear_null(spec: DgpSpec, gen: np.random.Generator):
    n, d_x, d_z = spec.n, spec.d_x, spec.d_z
    z = gen.standard_normal((n, d_z))
    s = z @ _score_weights(d_z)
    x = np.tanh(s)[:, None] + spec.params["noise_x"] * gen.standard_normal((n, d_x))
    y = 1.0 + np.sin(2.0 * s) + spec.params["noise_y"] * gen.standard_normal(n)
    return y, x, z


def _sample_partially_linear(spec: DgpSpec, gen: np.random.Generator):
    n, d_z = spec.n, spec.d_z
    if spec.d_x != 1:
        raise DomainError("'partially-linear' is defined for d_x = 1")
    z = gen.standard_normal((n, d_z))
    s = z @ _score_weights(d_z)
    x = 0.8 * s + spec.params["noise_x"] * gen.standard_normal(n)
    y = (
        spec.params["theta"] * x
        + np.sin(2.0 * s)
        + spec.params["noise_y"] * gen.standard_normal(n)
    )
    return y, x.reshape(-1, 1), z


def _sample_quadratic(spec: DgpSpec, gen: np.random.Generator):
    n, d_z = spec.n, spec.d_z
    if spec.d_x != 1:
        raise DomainError("'quadratic-null-for-gcm' is defined for d_x = 1")
    z = gen.standard_normal((n, d_z))
    x = gen.standard_normal(n)
    y = x * x + spec.params["noise_y"] * gen.standard_normal(n)
    return y, x.reshape(-1, 1), z


def _sample_fig2(spec: DgpSpec, gen: np.random.Generator):
    n = spec.n
    if spec.d_x != 1 or spec.d_z != 1:
        raise DomainError("'fig2' is defined for d_x = d_z = 1")
    x = gen.uniform(-1.0, 1.0, size=n)
    z = gen.uniform(-1.0, 1.0, size=n)
    y = (1.0 + np.sin(3.0 * x * x)) * (1.0 + z ** 3)
    y = y + spec.params["noise_y"] * gen.standard_normal(n)
    return y, x.reshape(-1, 1), z.reshape(-1, 1)


_ENTRIES: dict[str, _Entry] = {
    "linear-null": _Entry(
        _sample_linear_null, {"noise_y": 1.0, "noise_x": 1.0},
        ci_null=lambda p: True, gcm_null=lambda p: True,
    ),
    "gaussian-null": _Entry(
        _sample_gaussian_null, {"noise_y": 1.0, "noise_x": 1.0},
        ci_null=lambda p: True, gcm_null=lambda p: True,
    ),
    "nonlinear-null": _Entry(
        _sample_nonlinear_null, {"noise_y": 0.5, "noise_x": 0.5},
        ci_null=lambda p: True, gcm_null=lambda p: True,
    ),
    "partially-linear": _Entry(
        _sample_partially_linear, {"theta": 0.5, "noise_y": 1.0, "noise_x": 1.0},
        ci_null=lambda p: p["theta"] == 0.0, gcm_null=lambda p: p["theta"] == 0.0,
    ),
    "quadratic-null-for-gcm": _Entry(
        _sample_quadratic, {"noise_y": 1.0},
        ci_null=lambda p: False, gcm_null=lambda p: True,
    ),
    "fig2": _Entry(
        _sample_fig2, {"noise_y": 0.25},
        ci_null=lambda p: False, gcm_null=lambda p: True,
    ),
}

CATALOG = tuple(sorted(_ENTRIES))


def generate(spec: DgpSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Draw one dataset (y, X, Z) from a catalog entry; deterministic
    given spec.rng."""
    if spec.rng is None:
        raise DomainError("DgpSpec.rng must be set to generate data")
    gen = spec.rng.generator()
    y, x, z = _ENTRIES[spec.name].sampler(spec, gen)
    return (
        np.ascontiguousarray(y, dtype=np.float64),
        np.ascontiguousarray(x, dtype=np.float64),
        np.ascontiguousarray(z, dtype=np.float64),
    )


@dataclass(frozen=True)
class ExperimentResult:
    """Replicate p-values (and statistics) with the rejection rate at
    the configured level and its binomial standard error."""

    mode: str
    p_values: np.ndarray
    statistics: np.ndarray
    rejection_rate: float
    rate_se: float
    alpha: float
    replicates: int
    dgp: dict
    config: dict
    seconds: tuple[float, ...] = field(repr=False, default=())

    def to_json_dict(self, include_timings: bool = False) -> dict:
        out = {
            "experiment": self.mode,
            "alpha": self.alpha,
            "replicates": self.replicates,
            "rejection_rate": self.rejection_rate,
            "rate_se": self.rate_se,
            "p_values": self.p_values.tolist(),
            "statistics": self.statistics.tolist(),
            "dgp": self.dgp,
            "config": self.config,
        }
        if include_timings:
            out["seconds"] = list(self.seconds)
        return out

    def pvalues_csv_text(self) -> str:
        lines = ["replicate,p_value,statistic"]
        for i, (p, t) in enumerate(zip(self.p_values, self.statistics)):
            lines.append(f"{i},{repr(float(p))},{repr(float(t))}")
        return "\n".join(lines) + "\n"


def _run_experiment(
    mode: str,
    dgp: DgpSpec,
    config: TestConfig,
    replicates: int,
    alpha: float,
    rng: RngStream,
    threads: int,
) -> ExperimentResult:
    if replicates < 1:
        raise DomainError(f"replicates must be >= 1, got {replicates}")
    if not (0.0 < alpha <= 1.0):
        raise DomainError(f"alpha must lie in (0, 1], got {alpha}")
    children = rng.split(replicates)

    def run_one(i: int):
        gen_stream, test_stream = children[i].split(2)
        y, x, z = generate(replace(dgp, rng=gen_stream))
        began = time.perf_counter()
        p, statistic, _, _ = config.run(y, x, z, test_stream, threads=1)
        return p, statistic, time.perf_counter() - began

    outcomes = ordered_map(run_one, range(replicates), threads=threads)
    p_values = np.array([o[0] for o in outcomes])
    statistics = np.array([o[1] for o in outcomes])
    rate = float(np.mean(p_values <= alpha))
    se = float(np.sqrt(rate * (1.0 - rate) / replicates))
    return ExperimentResult(
        mode=mode,
        p_values=p_values,
        statistics=statistics,
        rejection_rate=rate,
        rate_se=se,
        alpha=alpha,
        replicates=replicates,
        dgp=replace(dgp, rng=None).echo(),
        config=config.echo(),
        seconds=tuple(o[2] for o in outcomes),
    )


def run_calibration(
    dgp: DgpSpec,
    config: TestConfig,
    replicates: int,
    alpha: float,
    rng: RngStream,
    threads: int = 1,
) -> ExperimentResult:
    """Estimate the type-I error of the configured test on a null DGP.

    The DGP must satisfy the tested null: conditional independence for
    both tests, or (for the GCM only) a vanishing residual-product
    covariance, which is the weaker null the GCM actually targets.
    """
    null_ok = dgp.is_ci_null() or (config.kind == "gcm" and dgp.is_gcm_blind_null())
    if not null_ok:
        raise DomainError(
            f"'{dgp.name}' does not satisfy the {config.kind} null; "
            "use run_power for alternatives"
        )
    return _run_experiment("calibration", dgp, config, replicates, alpha, rng, threads)


def run_power(
    dgp: DgpSpec,
    config: TestConfig,
    replicates: int,
    alpha: float,
    rng: RngStream,
    threads: int = 1,
) -> ExperimentResult:
    """Estimate rejection frequency on a DGP that violates conditional
    independence."""
    if dgp.is_ci_null():
        raise DomainError(
            f"'{dgp.name}' satisfies the null with these params; "
            "use run_calibration"
        )
    return _run_experiment("power", dgp, config, replicates, alpha, rng, threads)


def run_timing(
    dims: list[tuple[int, int]],
    config: TestConfig,
    repeats: int = 5,
    rng: RngStream | None = None,
    dgp_name: str = "linear-null",
) -> list[dict]:
    """Median wall-clock per (n, d) cell, plus the regression count the
    test performs there (GCM: d + 1 per test; PCM: per-split count
    times K, independent of d).

    One warm-up run per cell precedes ``repeats`` timed runs on the
    same data, so the median reflects steady-state work, not compile or
    cache effects.
    """
    if repeats < 5:
        raise DomainError(f"timing needs repeats >= 5, got {repeats}")
    if rng is None:
        raise DomainError("run_timing requires an explicit rng stream")
    rows = []
    for cell, (n, d) in enumerate(dims):
        cell_stream = rng.child(cell)
        gen_stream, test_stream = cell_stream.split(2)
        spec = DgpSpec(name=dgp_name, n=n, d_x=d, d_z=2, rng=gen_stream)
        y, x, z = generate(spec)
        config.run(y, x, z, test_stream, threads=1)  # warm-up
        timings = []
        for _ in range(repeats):
            began = time.perf_counter()
            config.run(y, x, z, test_stream, threads=1)
            timings.append(time.perf_counter() - began)
        if config.kind == "gcm":
            regressions = d + 1
        else:
            regressions = config.k * (4 if config.bernoulli_variance else 5)
        rows.append(
            {
                "n": n,
                "d": d,
                "median_seconds": float(np.median(timings)),
                "regressions_per_test": regressions,
            }
        )
    return rows


def two_modality_fixture(
    n: int, rng: RngStream, noise: float = 0.5
) -> tuple[Dataset, dict[str, list[str]], str]:
    """A dataset with a signal modality and a noise modality.

    Modality A carries two copies of the latent signal S driving the
    response (y = sin(2 S) + noise * e); modality B is independent
    noise.  The response depends on A given B and is independent of B
    given A.
    """
    gen = rng.generator()
    s = gen.standard_normal(n)
    b = gen.standard_normal((n, 2))
    y = np.sin(2.0 * s) + noise * gen.standard_normal(n)
    values = np.column_stack([y, s, s, b])
    dataset = Dataset(names=("y", "a1", "a2", "b1", "b2"), values=values)
    groups = {"A": ["a1", "a2"], "B": ["b1", "b2"]}
    return dataset, groups, "y"
