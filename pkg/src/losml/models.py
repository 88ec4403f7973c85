"""Model families behind one fit/predict surface, presets, and JSON persistence."""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .ensembles import (
    AdaBoostModel,
    AdaBoostParams,
    ForestModel,
    ForestParams,
    GbmModel,
    GbmParams,
    fit_adaboost,
    fit_forest,
    fit_gbm,
)
from .learners import LogisticModel, LogisticParams, TreeModel, TreeParams, fit_logistic, fit_tree

FORMAT_VERSION = 1

FAMILIES = ("logistic", "tree", "forest", "adaboost", "gbm")
DISPLAY_NAMES = {
    "logistic": "Logistic Regression",
    "tree": "Decision Tree",
    "forest": "Random Forest",
    "adaboost": "Ada Boost",
    "gbm": "LightGBM-style GBM",
}

_MODEL_TYPES = {
    "logistic": LogisticModel,
    "tree": TreeModel,
    "forest": ForestModel,
    "adaboost": AdaBoostModel,
    "gbm": GbmModel,
}

# Published tuned configurations, one per family.
PAPER_PRESETS: dict[str, dict[str, Any]] = {
    "logistic": {"C": 0.1, "penalty": "l2"},
    "tree": {
        "max_depth": 20,
        "min_samples_split": 10,
        "min_samples_leaf": 5,
        "max_features": "auto",
        "criterion": "entropy",
    },
    "forest": {
        "n_estimators": 200,
        "max_depth": 30,
        "min_samples_split": 2,
        "min_samples_leaf": 1,
        "max_features": "sqrt",
        "bootstrap": True,
        "seed": 42,
    },
    "adaboost": {"n_estimators": 100, "learning_rate": 0.1, "base_max_depth": 3},
    "gbm": {
        "n_estimators": 300,
        "learning_rate": 0.01,
        "max_depth": 10,
        "num_leaves": 63,
        "min_data_in_leaf": 20,
    },
}

_TREE_KEYS = {f.name for f in dataclasses.fields(TreeParams)}


class ModelError(ValueError):
    pass


def make_params(family: str, values: Mapping[str, Any] | None = None, seed: int | None = None):
    """Build the params dataclass for ``family`` from a flat key/value mapping.

    Forest tree settings may be given flat (``max_depth``) or nested under
    ``tree``. ``seed`` fills in a seed only where ``values`` does not set one.
    """
    values = dict(values or {})
    if family not in FAMILIES:
        raise ModelError(f"unknown model family {family!r}; expected one of {FAMILIES}")
    try:
        if family == "logistic":
            return LogisticParams(**values)
        if family == "tree":
            if seed is not None:
                values.setdefault("seed", seed)
            return TreeParams(**values)
        if family == "forest":
            tree = dict(values.pop("tree", {}) or {})
            for k in list(values):
                if k in _TREE_KEYS and k != "seed":
                    tree[k] = values.pop(k)
            tree.setdefault("max_features", "sqrt")
            if seed is not None:
                values.setdefault("seed", seed)
            return ForestParams(tree=TreeParams(**tree), **values)
        if family == "adaboost":
            return AdaBoostParams(**values)
        if seed is not None:
            values.setdefault("seed", seed)
        return GbmParams(**values)
    except TypeError as exc:
        raise ModelError(f"bad parameters for {family}: {exc}") from None


def params_to_dict(params) -> dict:
    return dataclasses.asdict(params)


def fit_model(family: str, X, y, params=None, n_classes: int | None = None):
    X = np.asarray(getattr(X, "values", X), dtype=float)
    y = np.asarray(getattr(y, "labels", y), dtype=np.int64)
    if n_classes is None:
        n_classes = int(y.max()) + 1
    params = params if params is not None else make_params(family)
    if family == "logistic":
        return fit_logistic(X, y, params, n_classes)
    if family == "tree":
        return fit_tree(X, y, params, n_classes)
    if family == "forest":
        return fit_forest(X, y, params, n_classes)
    if family == "adaboost":
        return fit_adaboost(X, y, params, n_classes)
    if family == "gbm":
        return fit_gbm(X, y, params, n_classes)
    raise ModelError(f"unknown model family {family!r}")


def family_of(model) -> str:
    for name, cls in _MODEL_TYPES.items():
        if isinstance(model, cls):
            return name
    raise ModelError(f"not a known model type: {type(model).__name__}")


def model_to_json(model, params=None) -> str:
    doc = {
        "format_version": FORMAT_VERSION,
        "model_type": family_of(model),
        "params": params_to_dict(params) if params is not None else None,
        "payload": model.to_dict(),
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False)


def save_model(model, path: str | Path, params=None) -> Path:
    path = Path(path)
    path.write_text(model_to_json(model, params))
    return path


def load_model(path: str | Path):
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ModelError(f"{path}: truncated or corrupt model file ({exc})") from None
    if not isinstance(doc, dict):
        raise ModelError(f"{path}: not a model envelope")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise ModelError(f"{path}: model format version {version!r}, expected {FORMAT_VERSION}")
    kind = doc.get("model_type")
    if kind not in _MODEL_TYPES:
        raise ModelError(f"{path}: unknown model_type {kind!r}")
    try:
        return _MODEL_TYPES[kind].from_dict(doc["payload"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelError(f"{path}: malformed {kind} payload ({exc})") from None
