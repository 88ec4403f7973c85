"""Principal component analysis with explained-variance based truncation."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .encoding import FeatureMatrix

PCA_VERSION = 1


class PcaError(ValueError):
    pass


@dataclass(frozen=True)
class PcaModel:
    """Fitted PCA.

    ``components`` rows are orthonormal directions ordered by decreasing
    variance. Each row is signed so that its largest-magnitude entry is
    non-negative.
    """

    means: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray
    feature_names: tuple[str, ...] = ()
    degenerate: bool = False

    @property
    def explained_ratio(self) -> np.ndarray:
        total = self.explained_variance.sum()
        if total <= 0:
            # every direction carries nothing; spread uniformly so ratios still sum to 1
            return np.full(len(self.explained_variance), 1.0 / len(self.explained_variance))
        return self.explained_variance / total

    @property
    def n_features(self) -> int:
        return len(self.means)

    def to_dict(self) -> dict:
        return {
            "version": PCA_VERSION,
            "feature_names": list(self.feature_names),
            "means": self.means.tolist(),
            "components": self.components.tolist(),
            "explained_variance": self.explained_variance.tolist(),
            "degenerate": self.degenerate,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PcaModel":
        if d.get("version") != PCA_VERSION:
            raise PcaError(f"unsupported PCA model version {d.get('version')!r}")
        return cls(
            np.array(d["means"], dtype=float),
            np.array(d["components"], dtype=float),
            np.array(d["explained_variance"], dtype=float),
            tuple(d["feature_names"]),
            bool(d["degenerate"]),
        )


def _values(X) -> tuple[np.ndarray, tuple[str, ...]]:
    if isinstance(X, FeatureMatrix):
        return X.values, X.feature_names
    v = np.asarray(X, dtype=float)
    if v.ndim != 2:
        raise PcaError("expected a 2-D matrix")
    return v, tuple(f"x{j}" for j in range(v.shape[1]))


def fit_pca(X) -> PcaModel:
    """Eigendecompose the population covariance of ``X``.

    The caller is expected to standardize first when features live on
    different scales.
    """
    values, names = _values(X)
    n, d = values.shape
    if n < 2:
        raise PcaError("PCA needs at least 2 rows")
    means = values.mean(axis=0)
    centered = values - means
    cov = centered.T @ centered / n
    eigval, eigvec = np.linalg.eigh(cov)
    order = np.argsort(-eigval, kind="stable")
    eigval = np.clip(eigval[order], 0.0, None)
    comps = eigvec[:, order].T.copy()
    for row in comps:
        k = np.argmax(np.abs(row))
        if row[k] < 0:
            row *= -1.0
    scale = max(1.0, float(np.abs(cov).max()))
    eigval[eigval < 1e-12 * scale] = 0.0
    degenerate = bool(eigval.sum() == 0.0)
    return PcaModel(means, comps, eigval, names, degenerate)


def pca_transform(model: PcaModel, X, k: int | None = None) -> FeatureMatrix:
    values, _ = _values(X)
    d = model.n_features
    k = d if k is None else k
    if not 1 <= k <= d:
        raise PcaError(f"k={k} outside [1, {d}]")
    if values.shape[1] != d:
        raise PcaError(f"expected {d} features, got {values.shape[1]}")
    scores = (values - model.means) @ model.components[:k].T
    return FeatureMatrix(scores, tuple(f"PC{i + 1}" for i in range(k)))


def pca_inverse(model: PcaModel, scores) -> FeatureMatrix:
    s, _ = _values(scores)
    k = s.shape[1]
    if k > model.n_features:
        raise PcaError(f"score width {k} exceeds {model.n_features} components")
    recon = s @ model.components[:k] + model.means
    names = model.feature_names or tuple(f"x{j}" for j in range(model.n_features))
    return FeatureMatrix(recon, names)


def select_components(explained_ratio, threshold: float = 0.95) -> int:
    """Smallest k whose cumulative explained ratio reaches ``threshold``."""
    ratio = np.asarray(explained_ratio, dtype=float)
    if not 0.0 < threshold <= 1.0:
        raise PcaError(f"threshold must be in (0, 1], got {threshold}")
    if abs(ratio.sum() - 1.0) > 1e-6:
        raise PcaError("explained ratios must sum to 1")
    if threshold == 1.0:
        return len(ratio)
    cum = np.cumsum(ratio)
    # slack for round-off when the cumulative sum lands exactly on the threshold
    return int(min(np.searchsorted(cum, threshold - 1e-12, side="left") + 1, len(ratio)))


def save_pca(model: PcaModel, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(model.to_dict(), indent=2))
    return path


def write_variance_curve(model: PcaModel, path: str | Path) -> Path:
    path = Path(path)
    cum = np.cumsum(model.explained_ratio)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "cumulative_ratio"])
        for k, c in enumerate(cum, start=1):
            w.writerow([k, repr(float(c))])
    return path
