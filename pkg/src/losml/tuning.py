"""Seeded random hyperparameter search over a fixed validation split."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .evaluation import METRIC_NAMES, MetricsReport, evaluate
from .models import fit_model, make_params

logger = logging.getLogger(__name__)


class SearchError(ValueError):
    pass


@dataclass(frozen=True)
class Choice:
    values: tuple

    def __post_init__(self):
        if not self.values:
            raise SearchError("choice sampler needs at least one value")
        object.__setattr__(self, "values", tuple(self.values))

    def sample(self, rng: np.random.Generator):
        return self.values[int(rng.integers(len(self.values)))]

    def contains(self, v) -> bool:
        return v in self.values

    def to_dict(self) -> dict:
        return {"type": "choice", "values": list(self.values)}


@dataclass(frozen=True)
class IntUniform:
    low: int
    high: int  # inclusive

    def __post_init__(self):
        if self.low > self.high:
            raise SearchError(f"empty integer range [{self.low}, {self.high}]")

    def sample(self, rng: np.random.Generator) -> int:
        return int(rng.integers(self.low, self.high + 1))

    def contains(self, v) -> bool:
        return isinstance(v, int) and self.low <= v <= self.high

    def to_dict(self) -> dict:
        return {"type": "int", "low": self.low, "high": self.high}


@dataclass(frozen=True)
class LogUniform:
    low: float
    high: float

    def __post_init__(self):
        if not 0 < self.low <= self.high:
            raise SearchError(f"log-uniform range needs 0 < low <= high, got [{self.low}, {self.high}]")

    def sample(self, rng: np.random.Generator) -> float:
        if self.low == self.high:
            return float(self.low)
        v = math.exp(rng.uniform(math.log(self.low), math.log(self.high)))
        return float(min(max(v, self.low), self.high))

    def contains(self, v) -> bool:
        return self.low <= v <= self.high

    def to_dict(self) -> dict:
        return {"type": "loguniform", "low": self.low, "high": self.high}


Sampler = Choice | IntUniform | LogUniform


def sampler_from_spec(spec) -> Sampler:
    """Build a sampler from JSON: a list means a choice, a dict names its type."""
    if isinstance(spec, (list, tuple)):
        return Choice(tuple(spec))
    kind = spec.get("type")
    if kind == "choice":
        return Choice(tuple(spec["values"]))
    if kind == "int":
        return IntUniform(int(spec["low"]), int(spec["high"]))
    if kind == "loguniform":
        return LogUniform(float(spec["low"]), float(spec["high"]))
    raise SearchError(f"unknown sampler spec {spec!r}")


@dataclass(frozen=True)
class SearchSpace:
    samplers: Mapping[str, Sampler]

    def __post_init__(self):
        if not self.samplers:
            raise SearchError("search space is empty")

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "SearchSpace":
        return cls({k: sampler_from_spec(v) for k, v in d.items()})

    def to_dict(self) -> dict:
        return {k: s.to_dict() for k, s in self.samplers.items()}

    def sample(self, rng: np.random.Generator) -> dict:
        return {k: s.sample(rng) for k, s in self.samplers.items()}


# Default spaces around each family's published configuration.
DEFAULT_SPACES: dict[str, dict] = {
    "logistic": {"C": {"type": "loguniform", "low": 1e-3, "high": 10.0}},
    "tree": {
        "max_depth": {"type": "int", "low": 3, "high": 30},
        "min_samples_split": {"type": "int", "low": 2, "high": 20},
        "min_samples_leaf": {"type": "int", "low": 1, "high": 10},
        "criterion": ["gini", "entropy"],
        "max_features": ["all", "sqrt"],
    },
    "forest": {
        "n_estimators": {"type": "int", "low": 10, "high": 200},
        "max_depth": {"type": "int", "low": 5, "high": 30},
        "min_samples_leaf": {"type": "int", "low": 1, "high": 5},
    },
    "adaboost": {
        "n_estimators": {"type": "int", "low": 20, "high": 100},
        "learning_rate": {"type": "loguniform", "low": 0.01, "high": 1.0},
        "base_max_depth": {"type": "int", "low": 1, "high": 4},
    },
    "gbm": {
        "n_estimators": {"type": "int", "low": 50, "high": 300},
        "learning_rate": {"type": "loguniform", "low": 0.01, "high": 0.3},
        "num_leaves": {"type": "int", "low": 7, "high": 63},
        "max_depth": {"type": "int", "low": 3, "high": 12},
        "min_data_in_leaf": {"type": "int", "low": 5, "high": 50},
    },
}


def trial_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1, dtype=np.uint32)[0])


@dataclass
class TrialResult:
    index: int
    seed: int
    params: dict
    objective: float | None = None
    report: MetricsReport | None = None
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None


@dataclass
class SearchResult:
    best_params: dict
    best_index: int
    best_objective: float
    trials: list[TrialResult] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "best_params": self.best_params,
            "best_index": self.best_index,
            "best_objective": self.best_objective,
            "trials": [
                {
                    "index": t.index,
                    "seed": t.seed,
                    "params": t.params,
                    "objective": t.objective,
                    "error": t.error,
                }
                for t in self.trials
            ],
        }


def random_search(
    space: SearchSpace,
    n_trials: int,
    seed: int,
    objective: str,
    family: str,
    X_train,
    y_train,
    X_val,
    y_val,
    n_classes: int | None = None,
    base_params: Mapping[str, Any] | None = None,
) -> SearchResult:
    """Fit one model per sampled configuration and keep the best validation score.

    Trial ``i`` samples from an rng seeded by ``trial_seed(seed, i)``; ties on
    the objective go to the earliest trial. Trials whose fit raises are kept
    in the record with their error and never win.
    """
    if n_trials < 1:
        raise SearchError("n_trials must be >= 1")
    if objective not in METRIC_NAMES:
        raise SearchError(f"objective must be one of {METRIC_NAMES}, got {objective!r}")
    y_tr = np.asarray(getattr(y_train, "labels", y_train))
    y_va = np.asarray(getattr(y_val, "labels", y_val))
    K = n_classes or int(max(y_tr.max(), y_va.max())) + 1
    X_va = np.asarray(getattr(X_val, "values", X_val), dtype=float)

    trials: list[TrialResult] = []
    for i in range(n_trials):
        s = trial_seed(seed, i)
        sampled = space.sample(np.random.default_rng(s))
        values = {**dict(base_params or {}), **sampled}
        trial = TrialResult(i, s, sampled)
        try:
            params = make_params(family, values, seed=s % (2**31))
            model = fit_model(family, X_train, y_tr, params, K)
            _, report = evaluate(y_va, model.predict(X_va), K)
            trial.report = report
            trial.objective = report.metric(objective)
        except ValueError as exc:
            trial.error = f"{type(exc).__name__}: {exc}"
            logger.warning("trial %d failed: %s", i, trial.error)
        trials.append(trial)

    ok = [t for t in trials if not t.failed]
    if not ok:
        raise SearchError("all trials failed")
    best = ok[0]
    for t in ok[1:]:
        if t.objective > best.objective:
            best = t
    return SearchResult(best.params, best.index, best.objective, trials)


def write_trials_csv(result: SearchResult, path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "seed", "params", "objective", "error"])
        for t in result.trials:
            w.writerow([
                t.index,
                t.seed,
                json.dumps(t.params, sort_keys=True),
                "" if t.objective is None else repr(t.objective),
                t.error or "",
            ])
    return path
