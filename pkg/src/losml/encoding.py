"""Ordinal string indexing, length-of-stay binning and z-scoring."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .dataset import UNKNOWN, Dataset

ENCODERS_VERSION = 1

SEVERITY_ORDER = ("Minor", "Moderate", "Major", "Extreme")
DEFAULT_ORDERS: dict[str, tuple[str, ...]] = {
    "Age Group": ("0 to 17", "18 to 29", "30 to 49", "50 to 69", "70 or Older"),
    "APR Risk of Mortality": SEVERITY_ORDER,
    "APR Severity of Illness Description": SEVERITY_ORDER,
}


class EncodingError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureMatrix:
    values: np.ndarray
    feature_names: tuple[str, ...]

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise EncodingError(f"feature matrix must be 2-D, got shape {v.shape}")
        if v.shape[1] != len(self.feature_names):
            raise EncodingError(
                f"{v.shape[1]} columns but {len(self.feature_names)} feature names"
            )
        if not np.isfinite(v).all():
            raise EncodingError("feature matrix contains non-finite values")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def take(self, rows) -> "FeatureMatrix":
        return FeatureMatrix(self.values[rows], self.feature_names)

    def select(self, columns: Sequence[int]) -> "FeatureMatrix":
        columns = list(columns)
        return FeatureMatrix(
            self.values[:, columns], tuple(self.feature_names[j] for j in columns)
        )


@dataclass(frozen=True)
class LabelVector:
    labels: np.ndarray
    n_classes: int

    def __post_init__(self):
        y = np.asarray(self.labels, dtype=np.int64)
        if y.ndim != 1:
            raise EncodingError("labels must be 1-D")
        if len(y) and (y.min() < 0 or y.max() >= self.n_classes):
            raise EncodingError(f"labels must lie in [0, {self.n_classes - 1}]")
        object.__setattr__(self, "labels", y)

    def __len__(self) -> int:
        return len(self.labels)

    def take(self, rows) -> "LabelVector":
        return LabelVector(self.labels[rows], self.n_classes)


# --------------------------------------------------------------------------
# ordinal maps
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class OrdinalMap:
    """Label ``ordered_categories[i]`` encodes as ``i + 1``; anything else as 0."""

    column: str
    ordered_categories: tuple[str, ...]
    unknown_code: int = 0

    def __post_init__(self):
        cats = tuple(self.ordered_categories)
        if len(set(cats)) != len(cats):
            raise EncodingError(f"duplicate labels in ordinal map for {self.column!r}")
        object.__setattr__(self, "ordered_categories", cats)
        object.__setattr__(self, "_lookup", {c: i + 1 for i, c in enumerate(cats)})

    @property
    def codes(self) -> dict[str, int]:
        return dict(self._lookup)

    def __len__(self) -> int:
        return len(self.ordered_categories)

    def transform(self, values: Iterable) -> np.ndarray:
        lookup = self._lookup
        return np.array(
            [lookup.get(v, self.unknown_code) for v in values], dtype=float
        )


def fit_ordinal_map(
    values: Iterable,
    order: Sequence[str] | None = None,
    column: str = "",
    ignore: Iterable[str] = (),
) -> OrdinalMap:
    """Fit a string index over ``values``.

    With an explicit ``order`` the codes follow it exactly and every
    observed label must appear in it. Without one, labels are ranked by
    descending frequency with ties broken lexicographically. Labels in
    ``ignore`` (typically the imputation placeholder) are left to the
    unknown code.
    """
    skip = set(ignore)
    seen = [v for v in values if v is not None and v not in skip]
    if not seen and order is None:
        raise EncodingError(f"no non-missing values to fit column {column!r}")
    if order is not None:
        order = tuple(order)
        unexpected = sorted(set(seen) - set(order))
        if unexpected:
            raise EncodingError(
                f"column {column!r}: labels {unexpected} not in the explicit order"
            )
        return OrdinalMap(column, order)
    counts = Counter(seen)
    ranked = sorted(counts, key=lambda c: (-counts[c], c))
    return OrdinalMap(column, tuple(ranked))


def apply_ordinal(m: OrdinalMap, value) -> int:
    return m._lookup.get(value, m.unknown_code)


def fit_encoders(
    ds: Dataset,
    orders: Mapping[str, Sequence[str]] | None = None,
    ignore: Iterable[str] = (UNKNOWN,),
) -> dict[str, OrdinalMap]:
    """Fit an ordinal map for every categorical column of ``ds``."""
    orders = DEFAULT_ORDERS if orders is None else orders
    ignore = tuple(ignore)
    maps = {}
    for name in ds.names:
        if ds.kinds[name] == "categorical":
            order = orders.get(name)
            maps[name] = fit_ordinal_map(
                ds[name], order, column=name, ignore=ignore if order else ()
            )
    return maps


# --------------------------------------------------------------------------
# binning
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class BinSpec:
    edges: tuple[tuple[int, int], ...]
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        edges = tuple((int(lo), int(hi)) for lo, hi in self.edges)
        if not edges:
            raise EncodingError("bin spec needs at least one range")
        if edges[0][0] != 1 or edges[-1][1] != 120:
            raise EncodingError("bins must jointly cover [1, 120]")
        if any(lo > hi for lo, hi in edges) or any(
            nxt[0] != cur[1] + 1 for cur, nxt in zip(edges, edges[1:])
        ):
            raise EncodingError(f"bins must be contiguous and non-overlapping: {edges}")
        labels = tuple(self.labels) or tuple(f"{lo}-{hi}" for lo, hi in edges)
        if len(labels) != len(edges):
            raise EncodingError("one label per bin required")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "labels", labels)

    @property
    def n_classes(self) -> int:
        return len(self.edges)

    @property
    def upper(self) -> np.ndarray:
        return np.array([hi for _, hi in self.edges])


# The overlapping 31-50 / 50-120 pair resolves lower-inclusive.
PAPER_BINS = BinSpec(((1, 5), (6, 10), (11, 20), (21, 30), (31, 50), (51, 120)))


def assign_bin(los_days: int, spec: BinSpec = PAPER_BINS) -> int:
    if not 1 <= los_days <= 120:
        raise EncodingError(f"length of stay {los_days} outside [1, 120]")
    return int(np.searchsorted(spec.upper, los_days, side="left"))


def assign_bins(los_days: np.ndarray, spec: BinSpec = PAPER_BINS) -> np.ndarray:
    los_days = np.asarray(los_days)
    if len(los_days) and (los_days.min() < 1 or los_days.max() > 120):
        raise EncodingError("length of stay outside [1, 120]")
    return np.searchsorted(spec.upper, los_days, side="left").astype(np.int64)


# --------------------------------------------------------------------------
# standardization
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class StandardizerParams:
    feature_names: tuple[str, ...]
    mean: np.ndarray
    std: np.ndarray

    @property
    def zero_variance(self) -> np.ndarray:
        return self.std == 0.0

    def to_dict(self) -> dict:
        return {
            "feature_names": list(self.feature_names),
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StandardizerParams":
        return cls(tuple(d["feature_names"]), np.array(d["mean"]), np.array(d["std"]))


def fit_standardizer(X: FeatureMatrix) -> StandardizerParams:
    if X.shape[0] < 2:
        raise EncodingError("standardizer needs at least 2 rows")
    mean = X.values.mean(axis=0)
    std = X.values.std(axis=0)  # population std
    return StandardizerParams(X.feature_names, mean, std)


def standardize(params: StandardizerParams, X: FeatureMatrix) -> FeatureMatrix:
    if tuple(params.feature_names) != tuple(X.feature_names):
        raise EncodingError("standardizer was fitted on different features")
    zero = params.zero_variance
    scale = np.where(zero, 1.0, params.std)
    Z = (X.values - params.mean) / scale
    Z[:, zero] = 0.0
    return FeatureMatrix(Z, X.feature_names)


def unstandardize(params: StandardizerParams, Z: FeatureMatrix) -> FeatureMatrix:
    return FeatureMatrix(Z.values * params.std + params.mean, Z.feature_names)


# --------------------------------------------------------------------------
# design matrix
# --------------------------------------------------------------------------


def build_design_matrix(
    ds: Dataset, maps: Mapping[str, OrdinalMap] | Sequence[OrdinalMap], spec: BinSpec = PAPER_BINS
) -> tuple[FeatureMatrix, LabelVector]:
    """Encode every non-target column and bin the target."""
    if not isinstance(maps, Mapping):
        maps = {m.column: m for m in maps}
    cols, names = [], []
    for name in ds.names:
        kind = ds.kinds[name]
        if kind == "los":
            continue
        if kind == "categorical":
            if name not in maps:
                raise EncodingError(f"no fitted ordinal map for categorical column {name!r}")
            cols.append(maps[name].transform(ds[name]))
        else:
            cols.append(ds[name].astype(float))
        names.append(name)
    if not cols:
        raise EncodingError("no feature columns left to encode")
    X = FeatureMatrix(np.column_stack(cols), tuple(names))
    y = LabelVector(assign_bins(ds[ds.los_name], spec), spec.n_classes)
    return X, y


def save_encoders(
    path: str | Path,
    maps: Mapping[str, OrdinalMap],
    spec: BinSpec,
    standardizer: StandardizerParams | None = None,
) -> Path:
    path = Path(path)
    doc = {
        "version": ENCODERS_VERSION,
        "ordinal_maps": [
            {"column": m.column, "ordered_categories": list(m.ordered_categories)}
            for m in maps.values()
        ],
        "bins": {"edges": [list(e) for e in spec.edges], "labels": list(spec.labels)},
        "standardizer": standardizer.to_dict() if standardizer else None,
    }
    path.write_text(json.dumps(doc, indent=2, sort_keys=True))
    return path


def load_encoders(
    path: str | Path,
) -> tuple[dict[str, OrdinalMap], BinSpec, StandardizerParams | None]:
    doc = json.loads(Path(path).read_text())
    if doc.get("version") != ENCODERS_VERSION:
        raise EncodingError(f"unsupported encoders version {doc.get('version')!r}")
    maps = {
        m["column"]: OrdinalMap(m["column"], tuple(m["ordered_categories"]))
        for m in doc["ordinal_maps"]
    }
    spec = BinSpec(tuple(tuple(e) for e in doc["bins"]["edges"]), tuple(doc["bins"]["labels"]))
    std = doc.get("standardizer")
    return maps, spec, StandardizerParams.from_dict(std) if std else None
