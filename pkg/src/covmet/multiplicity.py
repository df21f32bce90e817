"""Family-level drivers: p-value adjustment, per-variable significance
sweeps, and modality selection.

Holm's step-down adjustment controls the family-wise error rate at any
level without independence assumptions; Bonferroni is included as a
strictly-more-conservative comparator.  The sweep drivers run one
conditional independence test per hypothesis, each on its own child
random stream, tolerate per-hypothesis failures, and report raw and
adjusted p-values sorted by label.  There is deliberately no
correlation pre-screening option anywhere: screening before testing
inflates false positive rates, and these tests do not need it.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from .data import ColumnRoles, Dataset, select_blocks
from .errors import DomainError, RoleError
from .gcm import gcm_test
from .numkit import RngStream, as_vector
from .parallel import ordered_map
from .pcm import PcmEngines, pcm_test
from .regression import RegressorSpec, engine_echo

__all__ = [
    "HypothesisResult",
    "TestConfig",
    "TestReport",
    "bonferroni_adjust",
    "holm_adjust",
    "modality_select",
    "variable_sweep",
]


def holm_adjust(p) -> np.ndarray:
    """Step-down Holm-adjusted p-values, in the input order.

    Sort ascending; the i-th order statistic becomes
    max_{j <= i} min(1, (m - j + 1) * p_(j)); unsort.  Rejecting
    hypotheses with adjusted p <= alpha controls FWER at alpha.
    """
    p = as_vector(p, "p")
    if np.any(p < 0.0) or np.any(p > 1.0):
        raise DomainError("p-values must lie in [0, 1]")
    m = p.shape[0]
    order = np.argsort(p, kind="stable")
    scaled = np.minimum(1.0, (m - np.arange(m)) * p[order])
    stepped = np.maximum.accumulate(scaled)
    adjusted = np.empty(m, dtype=np.float64)
    adjusted[order] = stepped
    return adjusted


def bonferroni_adjust(p) -> np.ndarray:
    """min(1, m * p): always at least as large as the Holm adjustment."""
    p = as_vector(p, "p")
    if np.any(p < 0.0) or np.any(p > 1.0):
        raise DomainError("p-values must lie in [0, 1]")
    return np.minimum(1.0, p.shape[0] * p)


@dataclass(frozen=True)
class TestConfig:
    """Which test to run and with what engines.

    ``base_engine`` fills every regression slot; ``overrides`` replaces
    individual slots by name (gcm: yz, xz; pcm: g, m, v, d1_yz, d1_fz).
    ``k`` is the pcm split count; ``alpha`` the family-wise level.
    """

    __test__ = False  # keep pytest from collecting this as a test class

    kind: str = "pcm"
    base_engine: Any = field(default_factory=lambda: RegressorSpec("random_forest"))
    overrides: Mapping[str, Any] = field(default_factory=dict)
    k: int = 5
    alpha: float = 0.05
    bernoulli_variance: bool = False
    rel_tol: float = 1e-10

    _GCM_SLOTS = ("yz", "xz")
    _PCM_SLOTS = ("g", "m", "v", "d1_yz", "d1_fz")

    def __post_init__(self):
        if self.kind not in ("gcm", "pcm"):
            raise DomainError(f"test kind must be 'gcm' or 'pcm', got {self.kind!r}")
        valid = self._GCM_SLOTS if self.kind == "gcm" else self._PCM_SLOTS
        unknown = set(self.overrides) - set(valid)
        if unknown:
            raise DomainError(
                f"unknown engine slots for {self.kind}: {sorted(unknown)}; valid: {list(valid)}"
            )
        if self.k < 1:
            raise DomainError(f"k must be >= 1, got {self.k}")
        if not (0.0 < self.alpha <= 1.0):
            raise DomainError(f"alpha must lie in (0, 1], got {self.alpha}")
        object.__setattr__(self, "overrides", dict(self.overrides))

    def slot(self, name: str):
        return self.overrides.get(name, self.base_engine)

    def pcm_engines(self) -> PcmEngines:
        return PcmEngines(
            g=self.slot("g"), m=self.slot("m"),
            v=self.overrides.get("v", self.slot("g")),
            d1_yz=self.slot("d1_yz"), d1_fz=self.slot("d1_fz"),
            bernoulli_variance=self.bernoulli_variance,
        )

    def echo(self) -> dict:
        slots = self._GCM_SLOTS if self.kind == "gcm" else self._PCM_SLOTS
        return {
            "kind": self.kind,
            "k": self.k,
            "alpha": self.alpha,
            "engines": {name: engine_echo(self.slot(name)) for name in slots},
        }

    def run(self, y, X, Z, rng: RngStream, threads: int = 1):
        """Run the configured test; returns (p, statistic, df_or_k, result)."""
        if self.kind == "gcm":
            res = gcm_test(y, X, Z, self.slot("yz"), self.slot("xz"), rng,
                           rel_tol=self.rel_tol, threads=threads)
            return res.p, res.statistic, res.df, res
        res = pcm_test(y, X, Z, K=self.k, engines=self.pcm_engines(), rng=rng,
                       threads=threads)
        return res.p, res.statistic_avg, res.K, res


@dataclass(frozen=True)
class HypothesisResult:
    label: str
    p: float | None
    holm_p: float | None
    bonferroni_p: float | None
    reject: bool | None
    statistic: float | None
    df_or_k: int | None
    seconds: float | None
    stream: int
    error: str | None = None
    detail: Any = field(default=None, repr=False)


@dataclass(frozen=True)
class TestReport:
    """Per-hypothesis raw and adjusted p-values for one family.

    Rows are sorted by label.  Failed hypotheses carry their error
    message and no p-values; the Holm family is the set of hypotheses
    that produced a p-value.
    """

    __test__ = False

    rows: tuple[HypothesisResult, ...]
    alpha: float
    config: dict

    def to_json_dict(self, include_timings: bool = False) -> dict:
        return {
            "report": "hypothesis-family",
            "alpha": self.alpha,
            "config": self.config,
            "hypotheses": [
                {
                    "label": r.label,
                    "p": r.p,
                    "holm_p": r.holm_p,
                    "bonferroni_p": r.bonferroni_p,
                    "reject": r.reject,
                    "statistic": r.statistic,
                    "df_or_K": r.df_or_k,
                    "seconds": r.seconds if include_timings else None,
                    "stream": r.stream,
                    "error": r.error,
                }
                for r in self.rows
            ],
        }

    def to_csv_text(self, include_timings: bool = False) -> str:
        lines = ["label,raw_p,holm_p,statistic,df_or_K,seconds"]
        for r in self.rows:
            seconds = ""
            if include_timings and r.seconds is not None:
                seconds = repr(r.seconds)
            cells = [
                r.label,
                "" if r.p is None else repr(r.p),
                "" if r.holm_p is None else repr(r.holm_p),
                "" if r.statistic is None else repr(r.statistic),
                "" if r.df_or_k is None else str(r.df_or_k),
                seconds,
            ]
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"


def _run_family(
    dataset: Dataset,
    hypotheses: list[tuple[str, ColumnRoles]],
    config: TestConfig,
    rng: RngStream,
    threads: int,
) -> TestReport:
    labels = [label for label, _ in hypotheses]
    if len(set(labels)) != len(labels):
        raise DomainError("hypothesis labels must be unique")
    streams = rng.split(len(hypotheses))

    def run_one(i: int):
        label, roles = hypotheses[i]
        began = time.perf_counter()
        try:
            y, x, z = select_blocks(dataset, roles)
            p, statistic, df_or_k, detail = config.run(y, x, z, streams[i], threads=1)
            return (label, p, statistic, df_or_k, time.perf_counter() - began,
                    streams[i].stream, None, detail)
        except Exception as exc:  # per-hypothesis failures stay in the report
            return (label, None, None, None, time.perf_counter() - began,
                    streams[i].stream, f"{type(exc).__name__}: {exc}", None)

    raw = ordered_map(run_one, range(len(hypotheses)), threads=threads)

    tested = [(i, r[1]) for i, r in enumerate(raw) if r[1] is not None]
    holm = {}
    bonf = {}
    if tested:
        ps = np.array([p for _, p in tested])
        hvals = holm_adjust(ps)
        bvals = bonferroni_adjust(ps)
        for (i, _), h, b in zip(tested, hvals, bvals):
            holm[i] = float(h)
            bonf[i] = float(b)

    rows = []
    for i, (label, p, statistic, df_or_k, seconds, stream, error, detail) in enumerate(raw):
        rows.append(
            HypothesisResult(
                label=label,
                p=None if p is None else float(p),
                holm_p=holm.get(i),
                bonferroni_p=bonf.get(i),
                reject=None if p is None else bool(holm[i] <= config.alpha),
                statistic=None if statistic is None else float(statistic),
                df_or_k=None if df_or_k is None else int(df_or_k),
                seconds=seconds,
                stream=stream,
                error=error,
                detail=detail,
            )
        )
    rows.sort(key=lambda r: r.label)
    return TestReport(rows=tuple(rows), alpha=config.alpha, config=config.echo())


def variable_sweep(
    dataset: Dataset,
    response: str,
    candidates,
    config: TestConfig,
    rng: RngStream,
    threads: int = 1,
) -> TestReport:
    """Test response independence of each candidate given all the other
    candidates, with Holm-adjusted p-values over the family."""
    candidates = list(candidates)
    if not candidates:
        raise RoleError("at least one candidate column is required")
    hypotheses = []
    for j, name in enumerate(candidates):
        others = tuple(c for c in candidates if c != name)
        roles = ColumnRoles(response=response, candidates=(name,), conditioning=others)
        roles.validate(dataset)
        hypotheses.append((name, roles))
    return _run_family(dataset, hypotheses, config, rng, threads)


def modality_select(
    dataset: Dataset,
    response: str,
    modalities: Mapping[str, list[str]],
    config: TestConfig,
    rng: RngStream,
    threads: int = 1,
) -> TestReport:
    """Test response independence of each named column group given the
    union of the other groups.

    PCM is the intended default here: its regression count does not
    grow with group width, whereas GCM needs one regression per column
    in the tested group plus one for the response (a cost warning says
    exactly how many).
    """
    names = list(modalities)
    if len(names) < 2:
        raise RoleError("modality selection needs at least 2 groups")
    seen: dict[str, str] = {}
    for group, cols in modalities.items():
        if not cols:
            raise RoleError(f"modality '{group}' has no columns")
        for col in cols:
            if col in seen:
                raise RoleError(
                    f"column '{col}' appears in both '{seen[col]}' and '{group}'"
                )
            seen[col] = group

    hypotheses = []
    for group in names:
        cols = tuple(modalities[group])
        others = tuple(c for other in names if other != group for c in modalities[other])
        roles = ColumnRoles(response=response, candidates=cols, conditioning=others)
        roles.validate(dataset)
        # GCM cost grows with group width; flag groups where it exceeds
        # what the PCM alternative would spend
        if config.kind == "gcm" and len(cols) + 1 > 5 * config.k:
            warnings.warn(
                f"GCM on modality '{group}' requires {len(cols) + 1} regressions "
                f"({len(cols)} columns plus the response); PCM needs "
                f"{5 * config.k} regardless of width",
                stacklevel=2,
            )
        hypotheses.append((group, roles))
    return _run_family(dataset, hypotheses, config, rng, threads)
