"""Pluggable regression engines behind a single fit/predict/residuals
surface.

Built-in engines are named by ``RegressorSpec.kind``:

  * ``constant``       - predicts the training mean (also the fallback
                          for empty feature blocks),
  * ``linear``         - ordinary least squares, optional ridge penalty,
  * ``lasso_cv``       - L1 path with cross-validated penalty selection,
  * ``random_forest``  - bagged variance-reduction regression trees.

Anything with a ``fit(features, target, rng) -> model`` method whose
model has ``predict(features)`` can stand in for a spec wherever one is
accepted, which is how tests inject stub engines.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from ..errors import DomainError
from ..numkit import RngStream, as_matrix, as_vector

__all__ = [
    "FittedModel",
    "KINDS",
    "RegressorSpec",
    "cv_select_lambda",
    "fit",
    "fit_block",
    "predict",
    "residuals",
    "spec_from_json",
    "spec_to_json",
]

KINDS = ("constant", "linear", "lasso_cv", "random_forest")

_DEFAULT_PARAMS: dict[str, dict[str, Any]] = {
    "constant": {},
    "linear": {"ridge": 0.0},
    "lasso_cv": {"folds": 10, "grid_size": 100},
    "random_forest": {"n_trees": 500, "mtry": None, "min_node_size": 5, "max_depth": 0},
}


def _require_int(params: dict, key: str, minimum: int, kind: str) -> None:
    value = params[key]
    if not isinstance(value, (int, np.integer)) or isinstance(value, bool) or value < minimum:
        raise DomainError(f"{kind} parameter '{key}' must be an integer >= {minimum}, got {value!r}")
    params[key] = int(value)


@dataclass(frozen=True)
class RegressorSpec:
    """Declarative description of a regression engine.

    ``params`` is completed with kind-specific defaults and validated at
    construction, so a spec always carries its full configuration.
    ``seed`` feeds the engine's random stream when the caller does not
    supply one explicitly.
    """

    kind: str
    params: Mapping[str, Any] = field(default_factory=dict)
    seed: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown engine kind {self.kind!r}; choose one of {KINDS}")
        merged = dict(_DEFAULT_PARAMS[self.kind])
        extra = set(self.params) - set(merged)
        if extra:
            raise DomainError(
                f"unknown parameters for engine '{self.kind}': {sorted(extra)}; "
                f"valid names: {sorted(merged)}"
            )
        merged.update(self.params)
        if self.kind == "linear":
            ridge = merged["ridge"]
            if not isinstance(ridge, (int, float)) or isinstance(ridge, bool) or not np.isfinite(ridge) or ridge < 0:
                raise DomainError(f"linear parameter 'ridge' must be a finite value >= 0, got {ridge!r}")
            merged["ridge"] = float(ridge)
        elif self.kind == "lasso_cv":
            _require_int(merged, "folds", 2, self.kind)
            _require_int(merged, "grid_size", 2, self.kind)
        elif self.kind == "random_forest":
            _require_int(merged, "n_trees", 1, self.kind)
            _require_int(merged, "min_node_size", 1, self.kind)
            _require_int(merged, "max_depth", 0, self.kind)
            if merged["mtry"] is not None:
                _require_int(merged, "mtry", 1, self.kind)
        object.__setattr__(self, "params", merged)
        if self.seed is not None:
            if not isinstance(self.seed, (int, np.integer)) or isinstance(self.seed, bool):
                raise DomainError(f"seed must be an integer or None, got {self.seed!r}")
            object.__setattr__(self, "seed", int(self.seed))

    def to_json_dict(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params), "seed": self.seed}


def spec_to_json(spec: RegressorSpec) -> str:
    return json.dumps(spec.to_json_dict(), sort_keys=True)


def spec_from_json(text_or_obj) -> RegressorSpec:
    """Parse ``{"kind": ..., "params": {...}, "seed": ...}`` (params and
    seed optional) from a JSON string or an already-decoded mapping."""
    if isinstance(text_or_obj, str):
        try:
            obj = json.loads(text_or_obj)
        except json.JSONDecodeError as exc:
            raise DomainError(f"engine JSON is malformed: {exc}") from None
    else:
        obj = text_or_obj
    if not isinstance(obj, dict):
        raise DomainError(f"engine JSON must be an object, got {type(obj).__name__}")
    unknown = set(obj) - {"kind", "params", "seed"}
    if unknown:
        raise DomainError(f"engine JSON has unknown keys: {sorted(unknown)}")
    if "kind" not in obj:
        raise DomainError("engine JSON needs a 'kind' key")
    params = obj.get("params", {})
    if not isinstance(params, dict):
        raise DomainError("engine JSON 'params' must be an object")
    return RegressorSpec(kind=obj["kind"], params=params, seed=obj.get("seed"))


def engine_echo(engine) -> dict:
    """JSON-friendly description of a spec or custom engine object."""
    if isinstance(engine, RegressorSpec):
        return engine.to_json_dict()
    return {"kind": "custom", "repr": repr(engine)}


@dataclass(frozen=True)
class FittedModel:
    """A trained built-in engine: the spec it came from, the training
    shape, and the engine-specific state."""

    spec: RegressorSpec
    n: int
    p: int
    state: Any

    def predict(self, features) -> np.ndarray:
        x = _feature_matrix(features, self.p)
        return self.state.predict_inner(x)


def _feature_matrix(features, expected_cols: int | None = None) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    if x.ndim != 2:
        raise DomainError(f"features must be 1- or 2-dimensional, got ndim={x.ndim}")
    if x.size and not np.all(np.isfinite(x)):
        raise DomainError("features contain non-finite values")
    if expected_cols is not None and x.shape[1] != expected_cols:
        raise DomainError(
            f"feature width {x.shape[1]} does not match the training width {expected_cols}"
        )
    return np.ascontiguousarray(x)


def fit(spec, features, target, rng: RngStream | None = None):
    """Train an engine on (features, target).

    ``spec`` is either a RegressorSpec or a custom engine object with a
    ``fit(features, target, rng)`` method.  Built-in engines return a
    FittedModel; custom engines return whatever their ``fit`` returns
    (it must expose ``predict``).  Training is deterministic given
    (spec, data, rng).
    """
    if not isinstance(spec, RegressorSpec):
        if hasattr(spec, "fit"):
            model = spec.fit(_feature_matrix(features), as_vector(target, "target"), rng)
            if not hasattr(model, "predict"):
                raise DomainError(
                    f"custom engine {type(spec).__name__} returned a model without predict()"
                )
            return model
        raise DomainError(
            f"expected a RegressorSpec or an object with fit(), got {type(spec).__name__}"
        )

    x = _feature_matrix(features)
    y = as_vector(target, "target")
    n, p = x.shape
    if y.shape[0] != n:
        raise DomainError(f"features have {n} rows but target has {y.shape[0]}")
    if n < 2:
        raise DomainError(f"need at least 2 observations to fit, got {n}")
    if p == 0 and spec.kind != "constant":
        raise DomainError(
            f"engine '{spec.kind}' needs at least one feature column; "
            "fit a constant for empty feature blocks"
        )
    if rng is None:
        rng = RngStream(seed=spec.seed if spec.seed is not None else 0)

    from . import forest, lasso, linear

    if spec.kind == "constant":
        state = linear.fit_constant(y)
    elif spec.kind == "linear":
        state = linear.fit_linear(x, y, spec.params["ridge"])
    elif spec.kind == "lasso_cv":
        state = lasso.fit_lasso_cv(x, y, spec.params["folds"], spec.params["grid_size"], rng)
    else:
        state = forest.fit_forest(
            x,
            y,
            spec.params["n_trees"],
            spec.params["mtry"],
            spec.params["min_node_size"],
            spec.params["max_depth"],
            rng,
        )
    return FittedModel(spec=spec, n=n, p=p, state=state)


def fit_block(spec, features, target, rng: RngStream | None = None):
    """Like fit(), but an empty feature block (zero columns) degrades to
    the constant engine, the convention used for empty conditioning
    sets."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim == 2 and x.shape[1] == 0:
        return fit(RegressorSpec("constant"), x, target, rng)
    return fit(spec, features, target, rng)


def predict(model, features) -> np.ndarray:
    """Predict from any fitted model (built-in or custom)."""
    out = np.asarray(model.predict(_feature_matrix(features)), dtype=np.float64)
    if out.ndim != 1:
        raise DomainError(f"model predictions must be 1-dimensional, got ndim={out.ndim}")
    if not np.all(np.isfinite(out)):
        raise DomainError("model produced non-finite predictions")
    return out


def residuals(model, features, target) -> np.ndarray:
    """Observed minus predicted, validated to match in length."""
    y = as_vector(target, "target")
    yhat = predict(model, features)
    if yhat.shape[0] != y.shape[0]:
        raise DomainError(
            f"model predicted {yhat.shape[0]} values for {y.shape[0]} observations"
        )
    return y - yhat


from .lasso import cv_select_lambda  # noqa: E402  (public re-export)
