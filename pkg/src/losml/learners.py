"""Impurity measures, greedy classification trees and one-vs-rest logistic regression."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

logger = logging.getLogger(__name__)

# Gains closer than this are treated as ties so that tie-breaking does not
# hinge on floating-point summation order.
GAIN_TIE = 1e-12


class LearnerError(ValueError):
    pass


# --------------------------------------------------------------------------
# impurity
# --------------------------------------------------------------------------


def _check_proportions(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if (p < 0).any():
        raise LearnerError(f"negative class proportion in {p.tolist()}")
    if abs(p.sum() - 1.0) > 1e-9:
        raise LearnerError(f"class proportions sum to {p.sum()}, expected 1")
    return p


def entropy(proportions) -> float:
    """Shannon entropy in bits, with 0 log 0 taken as 0."""
    p = _check_proportions(proportions)
    nz = p[p > 0]
    return float(max(0.0, -(nz * np.log2(nz)).sum()))


def gini(proportions) -> float:
    p = _check_proportions(proportions)
    return float(1.0 - (p * p).sum())


def _impurity_rows(counts: np.ndarray, criterion: str) -> np.ndarray:
    """Row-wise impurity of a 2-D array of (weighted) class counts."""
    totals = counts.sum(axis=1, keepdims=True)
    p = np.divide(counts, totals, out=np.zeros_like(counts, dtype=float), where=totals > 0)
    if criterion == "gini":
        return 1.0 - (p * p).sum(axis=1)
    logp = np.log2(p, out=np.zeros_like(p), where=p > 0)
    return np.maximum(0.0, -(p * logp).sum(axis=1))


def node_impurity(counts, criterion: str = "entropy") -> float:
    counts = np.asarray(counts, dtype=float)
    if counts.sum() <= 0:
        return 0.0
    return float(_impurity_rows(counts[None, :], criterion)[0])


def information_gain(parent, left, right, criterion: str = "entropy") -> float:
    """Parent impurity minus the size-weighted impurities of the two children."""
    parent = np.asarray(parent, dtype=float)
    left = np.asarray(left, dtype=float)
    right = np.asarray(right, dtype=float)
    if parent.shape != left.shape or parent.shape != right.shape:
        raise LearnerError("count vectors must share a shape")
    if not np.allclose(left + right, parent, rtol=0, atol=1e-9):
        raise LearnerError("left and right counts must add up to the parent counts")
    n = parent.sum()
    if n <= 0:
        raise LearnerError("parent node is empty")
    return float(
        node_impurity(parent, criterion)
        - left.sum() / n * node_impurity(left, criterion)
        - right.sum() / n * node_impurity(right, criterion)
    )


# --------------------------------------------------------------------------
# trees
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TreeParams:
    criterion: str = "gini"
    max_depth: int | None = None
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    max_features: str | int = "all"
    seed: int = 0

    def __post_init__(self):
        if self.criterion not in ("gini", "entropy"):
            raise LearnerError(f"unknown criterion {self.criterion!r}")
        if self.max_depth is not None and self.max_depth < 1:
            raise LearnerError("max_depth must be >= 1")
        if self.min_samples_split < 2:
            raise LearnerError("min_samples_split must be >= 2")
        if self.min_samples_leaf < 1:
            raise LearnerError("min_samples_leaf must be >= 1")
        if isinstance(self.max_features, str):
            if self.max_features not in ("all", "sqrt", "auto"):
                raise LearnerError(f"unknown max_features {self.max_features!r}")
        elif self.max_features < 1:
            raise LearnerError("max_features must be >= 1")

    def n_candidate_features(self, d: int) -> int:
        mf = self.max_features
        if mf == "all":
            return d
        if mf in ("sqrt", "auto"):
            return max(1, int(math.sqrt(d)))
        return min(d, int(mf))


@dataclass
class TreeNode:
    """One node of a fitted tree; ``feature == -1`` marks a leaf.

    ``class_counts`` holds (possibly weighted) class totals of the training
    rows that reached the node; ``n_samples`` the raw row count.
    """

    class_counts: np.ndarray
    n_samples: int
    feature: int = -1
    threshold: float = math.nan
    left: int = -1
    right: int = -1

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0

    @property
    def predicted_class(self) -> int:
        return int(np.argmax(self.class_counts))


@dataclass(frozen=True)
class SplitCandidate:
    feature: int
    threshold: float
    gain: float


class _FlatTree:
    """Array view of a preorder node list for vectorized routing."""

    def __init__(self, feature, threshold, left, right):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=float)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = np.flatnonzero(self.feature[node] >= 0)
        while active.size:
            cur = node[active]
            f = self.feature[cur]
            go_left = X[active, f] <= self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
            active = active[self.feature[node[active]] >= 0]
        return node


@dataclass(frozen=True)
class TreeModel:
    nodes: tuple[TreeNode, ...]
    n_features: int
    n_classes: int
    importance: np.ndarray

    def __post_init__(self):
        nodes = self.nodes
        object.__setattr__(
            self,
            "_flat",
            _FlatTree(
                [n.feature for n in nodes],
                [n.threshold for n in nodes],
                [n.left for n in nodes],
                [n.right for n in nodes],
            ),
        )
        counts = np.array([n.class_counts for n in nodes], dtype=float)
        totals = counts.sum(axis=1, keepdims=True)
        proba = np.divide(counts, totals, out=np.zeros_like(counts), where=totals > 0)
        object.__setattr__(self, "_proba", proba)

    @property
    def root(self) -> TreeNode:
        return self.nodes[0]

    @property
    def n_leaves(self) -> int:
        return sum(n.is_leaf for n in self.nodes)

    @property
    def depth(self) -> int:
        depth = [0] * len(self.nodes)
        for i, n in enumerate(self.nodes):
            if not n.is_leaf:
                depth[n.left] = depth[n.right] = depth[i] + 1
        return max(depth)

    def _check(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features:
            raise LearnerError(f"expected {self.n_features} features, got {X.shape[1]}")
        return X

    def apply(self, X) -> np.ndarray:
        return self._flat.apply(self._check(X))

    def predict_proba(self, X) -> np.ndarray:
        return self._proba[self.apply(X)]

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1)

    def to_dict(self) -> dict:
        return {
            "n_features": self.n_features,
            "n_classes": self.n_classes,
            "importance": self.importance.tolist(),
            "nodes": [
                {
                    "feature": n.feature,
                    "threshold": None if n.is_leaf else n.threshold,
                    "left": n.left,
                    "right": n.right,
                    "class_counts": n.class_counts.tolist(),
                    "n_samples": n.n_samples,
                }
                for n in self.nodes
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TreeModel":
        nodes = tuple(
            TreeNode(
                np.array(n["class_counts"], dtype=float),
                int(n["n_samples"]),
                int(n["feature"]),
                math.nan if n["threshold"] is None else float(n["threshold"]),
                int(n["left"]),
                int(n["right"]),
            )
            for n in d["nodes"]
        )
        return cls(nodes, int(d["n_features"]), int(d["n_classes"]), np.array(d["importance"]))


def tree_predict(model: TreeModel, x) -> tuple[int, np.ndarray]:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise LearnerError("tree_predict takes a single feature row")
    proba = model.predict_proba(x[None, :])[0]
    return int(np.argmax(proba)), proba


def best_split(
    X: np.ndarray,
    y: np.ndarray,
    rows: np.ndarray,
    params: TreeParams,
    rng: np.random.Generator | None = None,
    n_classes: int | None = None,
    sample_weight: np.ndarray | None = None,
) -> SplitCandidate | None:
    """Highest-gain threshold split of ``rows``, or None if no split helps.

    Thresholds are midpoints between consecutive distinct values; ties go to
    the smaller feature index, then the smaller threshold.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    rows = np.asarray(rows)
    K = int(n_classes if n_classes is not None else y.max() + 1)
    w = np.ones(len(y)) if sample_weight is None else np.asarray(sample_weight, dtype=float)
    m = len(rows)
    msl = params.min_samples_leaf
    if m < max(params.min_samples_split, 2 * msl):
        return None

    yr = y[rows]
    wr = w[rows]
    parent = np.bincount(yr, weights=wr, minlength=K)
    if np.count_nonzero(parent) <= 1:
        return None
    W = parent.sum()
    h_parent = node_impurity(parent, params.criterion)

    d = X.shape[1]
    k = params.n_candidate_features(d)
    if k < d:
        rng = rng if rng is not None else np.random.default_rng(params.seed)
        features = np.sort(rng.choice(d, size=k, replace=False))
    else:
        features = np.arange(d)

    # boundary i separates sorted positions [0..i] from [i+1..m-1]
    pos = np.arange(m - 1)
    size_ok = (pos + 1 >= msl) & (m - pos - 1 >= msl)
    onehot = np.zeros((m, K))
    best: SplitCandidate | None = None
    for f in features:
        x = X[rows, f]
        order = np.argsort(x, kind="stable")
        xs = x[order]
        valid = size_ok & (xs[:-1] < xs[1:])
        if not valid.any():
            continue
        onehot[:] = 0.0
        onehot[np.arange(m), yr[order]] = wr[order]
        left = np.cumsum(onehot, axis=0)[:-1][valid]
        right = parent - left
        wl = left.sum(axis=1)
        gains = (
            h_parent
            - wl / W * _impurity_rows(left, params.criterion)
            - (W - wl) / W * _impurity_rows(right, params.criterion)
        )
        top = gains.max()
        j = int(np.flatnonzero(gains >= top - GAIN_TIE)[0])
        if best is None or gains[j] > best.gain + GAIN_TIE:
            i = pos[valid][j]
            t = 0.5 * (xs[i] + xs[i + 1])
            if t >= xs[i + 1]:
                t = xs[i]
            best = SplitCandidate(int(f), float(t), float(gains[j]))
    if best is None or best.gain <= GAIN_TIE:
        return None
    return best


def fit_tree(
    X,
    y,
    params: TreeParams = TreeParams(),
    n_classes: int | None = None,
    sample_weight=None,
    rng: np.random.Generator | None = None,
) -> TreeModel:
    """Grow a classification tree greedily, depth first.

    Growth at a node stops on ``max_depth``, ``min_samples_split``, purity or
    when no split has positive gain. ``importance[f]`` accumulates the
    weight-fraction-scaled gain of every split on ``f``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise LearnerError("fit_tree needs a non-empty 2-D feature matrix")
    if len(y) != X.shape[0]:
        raise LearnerError("X and y lengths differ")
    if y.min() < 0:
        raise LearnerError("labels must be non-negative")
    K = int(n_classes if n_classes is not None else y.max() + 1)
    if y.max() >= K:
        raise LearnerError(f"label {y.max()} out of range for {K} classes")
    w = np.ones(len(y)) if sample_weight is None else np.asarray(sample_weight, dtype=float)
    rng = rng if rng is not None else np.random.default_rng(params.seed)

    n, d = X.shape
    W_total = w.sum()
    importance = np.zeros(d)
    nodes: list[TreeNode] = []
    # (rows, depth, parent index, is_left); right pushed first so left is built first
    stack = [(np.arange(n), 0, -1, False)]
    while stack:
        rows, depth, parent, is_left = stack.pop()
        counts = np.bincount(y[rows], weights=w[rows], minlength=K)
        idx = len(nodes)
        node = TreeNode(counts, len(rows))
        nodes.append(node)
        if parent >= 0:
            if is_left:
                nodes[parent].left = idx
            else:
                nodes[parent].right = idx
        if params.max_depth is not None and depth >= params.max_depth:
            continue
        split = best_split(X, y, rows, params, rng, K, w)
        if split is None:
            continue
        node.feature = split.feature
        node.threshold = split.threshold
        importance[split.feature] += counts.sum() / W_total * split.gain
        go_left = X[rows, split.feature] <= split.threshold
        stack.append((rows[~go_left], depth + 1, idx, False))
        stack.append((rows[go_left], depth + 1, idx, True))
    return TreeModel(tuple(nodes), d, K, importance)


# --------------------------------------------------------------------------
# logistic regression
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class LogisticParams:
    C: float = 1.0
    penalty: str = "l2"
    max_iter: int = 100
    tol: float = 1e-6

    def __post_init__(self):
        if not self.C > 0:
            raise LearnerError("C must be positive")
        if self.penalty != "l2":
            raise LearnerError("only the l2 penalty is supported")
        if self.max_iter < 1 or not self.tol > 0:
            raise LearnerError("max_iter must be >= 1 and tol > 0")


@dataclass(frozen=True)
class LogisticModel:
    weights: np.ndarray  # (K, d)
    intercepts: np.ndarray  # (K,)
    objective_history: tuple[tuple[float, ...], ...] = field(default=(), compare=False)
    gradient_norms: tuple[float, ...] = field(default=(), compare=False)

    @property
    def n_features(self) -> int:
        return self.weights.shape[1]

    @property
    def n_classes(self) -> int:
        return self.weights.shape[0]

    def decision_function(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features:
            raise LearnerError(f"expected {self.n_features} features, got {X.shape[1]}")
        return X @ self.weights.T + self.intercepts

    def predict_proba(self, X) -> np.ndarray:
        z = self.decision_function(X)
        log_sig = -np.logaddexp(0.0, -z)
        log_sig -= log_sig.max(axis=1, keepdims=True)
        p = np.exp(log_sig)
        return p / p.sum(axis=1, keepdims=True)

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1)

    def to_dict(self) -> dict:
        return {"weights": self.weights.tolist(), "intercepts": self.intercepts.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "LogisticModel":
        return cls(np.array(d["weights"], dtype=float), np.array(d["intercepts"], dtype=float))


def logistic_predict_proba(model: LogisticModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return model.predict_proba(x[None, :])[0]
    return model.predict_proba(x)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _binary_newton(
    Xa: np.ndarray, t: np.ndarray, C: float, max_iter: int, tol: float
) -> tuple[np.ndarray, list[float], float]:
    """Minimize sum log(1 + exp(-s z)) + ||w||^2 / (2C) with an unpenalized intercept.

    ``Xa`` carries a trailing column of ones for the intercept. Damped Newton
    with Armijo backtracking, so the objective never increases.
    """
    n, p = Xa.shape
    reg = np.full(p, 1.0 / C)
    reg[-1] = 0.0
    s = 2.0 * t - 1.0

    def objective(beta):
        z = Xa @ beta
        return float(np.logaddexp(0.0, -s * z).sum() + 0.5 * (reg * beta * beta).sum())

    beta = np.zeros(p)
    f = objective(beta)
    history = [f]
    gnorm = math.inf
    for _ in range(max_iter):
        mu = _sigmoid(Xa @ beta)
        grad = Xa.T @ (mu - t) + reg * beta
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= tol:
            break
        H = (Xa * (mu * (1.0 - mu))[:, None]).T @ Xa + np.diag(reg)
        H[np.diag_indices(p)] += 1e-12 * max(1.0, float(np.abs(H).max()))
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H, grad, rcond=None)[0]
        slope = float(grad @ step)
        if not slope > 0:
            step, slope = grad, float(grad @ grad)
        alpha = 1.0
        while True:
            cand = beta - alpha * step
            f_new = objective(cand)
            if f_new <= f - 1e-4 * alpha * slope:
                break
            alpha *= 0.5
            if alpha < 1e-12:
                f_new, cand = f, beta
                break
        if f_new == f and cand is beta:
            break
        beta, f = cand, f_new
        history.append(f)
    else:
        mu = _sigmoid(Xa @ beta)
        gnorm = float(np.linalg.norm(Xa.T @ (mu - t) + reg * beta))
    return beta, history, gnorm


def fit_logistic(
    X, y, params: LogisticParams = LogisticParams(), n_classes: int | None = None
) -> LogisticModel:
    """One-vs-rest L2 logistic regression (penalty ``||w||^2 / 2C`` per class)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or len(y) != X.shape[0]:
        raise LearnerError("X must be 2-D with one label per row")
    if not np.isfinite(X).all():
        raise LearnerError("non-finite features")
    present = np.unique(y)
    if len(present) < 2:
        raise LearnerError("degenerate one-class fit")
    K = int(n_classes if n_classes is not None else y.max() + 1)
    if len(y) < K:
        raise LearnerError(f"need at least {K} rows for {K} classes")
    Xa = np.hstack([X, np.ones((X.shape[0], 1))])
    W = np.zeros((K, X.shape[1]))
    b = np.zeros(K)
    histories, norms = [], []
    for c in range(K):
        beta, hist, gnorm = _binary_newton(
            Xa, (y == c).astype(float), params.C, params.max_iter, params.tol
        )
        W[c], b[c] = beta[:-1], beta[-1]
        histories.append(tuple(hist))
        norms.append(gnorm)
        if gnorm > params.tol:
            logger.info("class %d: stopped at gradient norm %.3g after %d steps", c, gnorm, len(hist) - 1)
    return LogisticModel(W, b, tuple(histories), tuple(norms))


# --------------------------------------------------------------------------
# feature importance
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class FeatureImportance:
    items: tuple[tuple[str, float], ...]
    degenerate: bool = False

    def top(self, k: int) -> list[str]:
        return [name for name, _ in self.items[:k]]


def feature_importance(model, feature_names: Sequence[str] | None = None) -> FeatureImportance:
    """Importances normalized to sum to 1, sorted descending (stable on ties).

    Any model exposing a raw ``importance`` vector works; ensembles provide
    the average of their members.
    """
    raw = np.asarray(model.importance, dtype=float)
    names = list(feature_names) if feature_names is not None else [f"x{j}" for j in range(len(raw))]
    if len(names) != len(raw):
        raise LearnerError("one name per feature required")
    total = raw.sum()
    degenerate = not total > 0
    scores = np.zeros_like(raw) if degenerate else raw / total
    order = np.argsort(-scores, kind="stable")
    return FeatureImportance(tuple((names[j], float(scores[j])) for j in order), degenerate)
