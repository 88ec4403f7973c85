"""Random forest, multiclass AdaBoost and a histogram gradient-boosting machine."""

from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ._kernels import best_bin_split, build_histogram
from .learners import LearnerError, TreeModel, TreeParams, _FlatTree, fit_tree

logger = logging.getLogger(__name__)


def _check_xy(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise LearnerError("need a non-empty 2-D feature matrix")
    if len(y) != X.shape[0]:
        raise LearnerError("X and y lengths differ")
    return X, y


def _vote(pred_lists: list[np.ndarray], weights, K: int) -> np.ndarray:
    """Weighted vote; ``argmax`` resolves ties to the smallest class index."""
    n = len(pred_lists[0])
    scores = np.zeros((n, K))
    rows = np.arange(n)
    for pred, w in zip(pred_lists, weights):
        scores[rows, pred] += w
    return scores


def _check_width(X, d: int) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != d:
        raise LearnerError(f"expected {d} features, got {X.shape[1]}")
    return X


# --------------------------------------------------------------------------
# random forest
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ForestParams:
    n_estimators: int = 100
    tree: TreeParams = TreeParams(max_features="sqrt")
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_estimators < 1:
            raise LearnerError("n_estimators must be >= 1")


@dataclass(frozen=True)
class ForestModel:
    trees: tuple[TreeModel, ...]

    def __post_init__(self):
        if not self.trees:
            raise LearnerError("forest has no trees")
        shapes = {(t.n_features, t.n_classes) for t in self.trees}
        if len(shapes) != 1:
            raise LearnerError("forest members disagree on feature or class count")

    @property
    def n_features(self) -> int:
        return self.trees[0].n_features

    @property
    def n_classes(self) -> int:
        return self.trees[0].n_classes

    @property
    def importance(self) -> np.ndarray:
        return np.mean([t.importance for t in self.trees], axis=0)

    def member_predictions(self, X) -> list[np.ndarray]:
        X = _check_width(X, self.n_features)
        return [t.predict(X) for t in self.trees]

    def predict(self, X) -> np.ndarray:
        votes = _vote(self.member_predictions(X), [1.0] * len(self.trees), self.n_classes)
        return np.argmax(votes, axis=1)

    def predict_proba(self, X) -> np.ndarray:
        votes = _vote(self.member_predictions(X), [1.0] * len(self.trees), self.n_classes)
        return votes / len(self.trees)

    def to_dict(self) -> dict:
        return {"trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def from_dict(cls, d: dict) -> "ForestModel":
        return cls(tuple(TreeModel.from_dict(t) for t in d["trees"]))


def fit_forest(X, y, params: ForestParams = ForestParams(), n_classes: int | None = None) -> ForestModel:
    """Bagged trees; tree ``i`` draws its bootstrap and feature subsets from ``(seed, i)``."""
    X, y = _check_xy(X, y)
    K = int(n_classes if n_classes is not None else y.max() + 1)
    n = len(y)
    trees = []
    for i in range(params.n_estimators):
        rng = np.random.default_rng([params.seed, i])
        if params.bootstrap:
            idx = rng.integers(0, n, size=n)
            trees.append(fit_tree(X[idx], y[idx], params.tree, K, rng=rng))
        else:
            trees.append(fit_tree(X, y, params.tree, K, rng=rng))
    return ForestModel(tuple(trees))


def forest_predict(model: ForestModel, x) -> int:
    return int(model.predict(np.asarray(x, dtype=float)[None, :])[0])


# --------------------------------------------------------------------------
# AdaBoost
# --------------------------------------------------------------------------

# Stage weight used when a stage makes no weighted error.
PERFECT_STAGE_LOGIT = math.log(1e12)


@dataclass(frozen=True)
class AdaBoostParams:
    n_estimators: int = 50
    learning_rate: float = 1.0
    base_max_depth: int = 1
    criterion: str = "gini"

    def __post_init__(self):
        if self.n_estimators < 1:
            raise LearnerError("n_estimators must be >= 1")
        if not self.learning_rate > 0:
            raise LearnerError("learning_rate must be positive")


@dataclass(frozen=True)
class AdaBoostModel:
    stages: tuple[tuple[TreeModel, float], ...]

    def __post_init__(self):
        if not self.stages:
            raise LearnerError("AdaBoost model needs at least one stage")

    @property
    def n_features(self) -> int:
        return self.stages[0][0].n_features

    @property
    def n_classes(self) -> int:
        return self.stages[0][0].n_classes

    @property
    def importance(self) -> np.ndarray:
        return np.mean([t.importance for t, _ in self.stages], axis=0)

    def decision_scores(self, X) -> np.ndarray:
        X = _check_width(X, self.n_features)
        return _vote([t.predict(X) for t, _ in self.stages], [a for _, a in self.stages], self.n_classes)

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.decision_scores(X), axis=1)

    def predict_proba(self, X) -> np.ndarray:
        s = self.decision_scores(X)
        total = s.sum(axis=1, keepdims=True)
        K = self.n_classes
        return np.divide(s, total, out=np.full_like(s, 1.0 / K), where=total > 0)

    def to_dict(self) -> dict:
        return {"stages": [{"alpha": a, "tree": t.to_dict()} for t, a in self.stages]}

    @classmethod
    def from_dict(cls, d: dict) -> "AdaBoostModel":
        return cls(tuple((TreeModel.from_dict(s["tree"]), float(s["alpha"])) for s in d["stages"]))


def fit_adaboost(
    X,
    y,
    params: AdaBoostParams = AdaBoostParams(),
    n_classes: int | None = None,
    weight_trace: list | None = None,
) -> AdaBoostModel:
    """Stagewise multiclass boosting with the ``ln(K - 1)`` stage-weight correction.

    Stage weight is ``lr * (ln((1 - err) / err) + ln(K - 1))``; misclassified
    rows are scaled by ``exp(alpha)`` and the weights renormalized. A stage no
    better than chance is discarded and ends training; a perfect stage is
    kept with a capped weight and also ends it. ``weight_trace``, if given,
    receives the sample-weight vector in force at every stage.
    """
    X, y = _check_xy(X, y)
    if len(np.unique(y)) < 2:
        raise LearnerError("degenerate one-class labels")
    K = int(n_classes if n_classes is not None else y.max() + 1)
    if K < 2:
        raise LearnerError("AdaBoost needs at least 2 classes")
    n = len(y)
    w = np.full(n, 1.0 / n)
    tree_params = TreeParams(criterion=params.criterion, max_depth=params.base_max_depth)
    chance = 1.0 - 1.0 / K
    stages: list[tuple[TreeModel, float]] = []
    for m in range(params.n_estimators):
        if weight_trace is not None:
            weight_trace.append(w.copy())
        tree = fit_tree(X, y, tree_params, K, sample_weight=w)
        miss = tree.predict(X) != y
        err = float(w[miss].sum())
        if err >= chance - 1e-12:
            logger.info("stage %d error %.4f is no better than chance; stopping", m, err)
            break
        if err <= 0.0:
            stages.append((tree, params.learning_rate * PERFECT_STAGE_LOGIT))
            break
        alpha = params.learning_rate * (math.log((1.0 - err) / err) + math.log(K - 1))
        stages.append((tree, alpha))
        w = w.copy()
        w[miss] *= math.exp(alpha)
        w /= w.sum()
    if not stages:
        raise LearnerError("no stage better than chance")
    return AdaBoostModel(tuple(stages))


def adaboost_predict(model: AdaBoostModel, x) -> int:
    return int(model.predict(np.asarray(x, dtype=float)[None, :])[0])


# --------------------------------------------------------------------------
# gradient boosting
# --------------------------------------------------------------------------


class GbmError(LearnerError):
    pass


@dataclass(frozen=True)
class GbmParams:
    n_estimators: int = 100
    learning_rate: float = 0.1
    max_depth: int | None = None
    num_leaves: int = 31
    min_data_in_leaf: int = 20
    min_sum_hessian_in_leaf: float = 1e-3
    leaf_l2: float = 1.0
    n_bins: int = 255
    goss_top_fraction: float = 0.0
    goss_other_fraction: float = 1.0
    efb_max_conflict: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.n_estimators < 0:
            raise GbmError("n_estimators must be >= 0")
        if self.learning_rate < 0:
            raise GbmError("learning_rate must be >= 0")
        if self.num_leaves < 2:
            raise GbmError("num_leaves must be >= 2")
        if self.max_depth is not None and self.max_depth < 1:
            raise GbmError("max_depth must be >= 1")
        if self.leaf_l2 < 0:
            raise GbmError("leaf_l2 must be >= 0")
        if not 2 <= self.n_bins:
            raise GbmError("n_bins must be >= 2")
        a, b = self.goss_top_fraction, self.goss_other_fraction
        if a < 0 or b < 0 or a > 1 or b > 1 or a + b > 1 + 1e-12:
            raise GbmError("GOSS fractions must lie in [0, 1] with a + b <= 1")

    @property
    def goss_enabled(self) -> bool:
        return self.goss_top_fraction + self.goss_other_fraction < 1.0 - 1e-12


def leaf_weight(G: float, H: float, lam: float) -> float:
    """Minimizer ``-G / (H + lam)`` of the regularized second-order leaf objective."""
    if H < 0 or lam < 0:
        raise GbmError("hessian sum and lambda must be non-negative")
    if H + lam <= 0:
        raise GbmError("H + lambda must be positive")
    return -G / (H + lam)


def split_gain(GL, HL, GR, HR, lam):
    return 0.5 * (GL * GL / (HL + lam) + GR * GR / (HR + lam) - (GL + GR) ** 2 / (HL + HR + lam))


def goss_sample(
    grad_magnitude, a: float, b: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Keep the ``ceil(a n)`` largest gradients plus ``ceil(b n)`` random others.

    Returns ascending row indices and their weights: 1 for the top rows,
    ``(1 - a) / b`` for the sampled remainder.
    """
    if a < 0 or b < 0 or a + b > 1 + 1e-12:
        raise GbmError("GOSS needs a, b >= 0 and a + b <= 1")
    g = np.abs(np.asarray(grad_magnitude, dtype=float))
    n = len(g)
    n_top = min(n, math.ceil(a * n - 1e-9))
    order = np.argsort(-g, kind="stable")
    top = order[:n_top]
    rest = order[n_top:]
    n_other = min(len(rest), math.ceil(b * n - 1e-9))
    other = rng.choice(rest, size=n_other, replace=False) if n_other else np.empty(0, np.int64)
    idx = np.concatenate([top, other]).astype(np.int64)
    w = np.concatenate([np.ones(len(top)), np.full(len(other), (1.0 - a) / b if b > 0 else 0.0)])
    order = np.argsort(idx, kind="stable")
    return idx[order], w[order]


# ---- exclusive feature bundling -----------------------------------------


@dataclass(frozen=True)
class Bundle:
    """Features merged into one column; feature ``features[k]`` occupies
    merged values ``offsets[k] + 1 .. offsets[k] + spans[k]``."""

    features: tuple[int, ...]
    offsets: tuple[int, ...]
    spans: tuple[int, ...]
    conflicts: int = 0

    @property
    def n_values(self) -> int:
        return 1 + sum(self.spans)


def efb_bundle(columns, max_conflict: int = 0) -> list[Bundle]:
    """Greedily merge features that are rarely nonzero on the same row.

    Features are visited by descending nonzero count (stable). A feature
    joins the first bundle whose accumulated conflict count stays within
    ``max_conflict``, otherwise opens a new bundle. Columns are expected to
    hold non-negative integer codes (bin indices).
    """
    C = np.asarray(columns)
    if C.ndim != 2:
        raise GbmError("efb_bundle expects a 2-D column matrix")
    if (C < 0).any() or not np.array_equal(C, np.floor(C)):
        raise GbmError("EFB columns must hold non-negative integer codes")
    nz = C != 0
    order = np.argsort(-nz.sum(axis=0), kind="stable")
    groups: list[dict] = []
    for f in order:
        placed = False
        for grp in groups:
            clash = int(np.count_nonzero(grp["mask"] & nz[:, f]))
            if grp["conflicts"] + clash <= max_conflict:
                grp["features"].append(int(f))
                grp["mask"] |= nz[:, f]
                grp["conflicts"] += clash
                placed = True
                break
        if not placed:
            groups.append({"features": [int(f)], "mask": nz[:, f].copy(), "conflicts": 0})
    bundles = []
    for grp in groups:
        spans = [max(1, int(C[:, f].max())) for f in grp["features"]]
        offsets = np.concatenate([[0], np.cumsum(spans)[:-1]]).astype(int)
        bundles.append(Bundle(tuple(grp["features"]), tuple(int(o) for o in offsets), tuple(spans), grp["conflicts"]))
    return bundles


def efb_merge(columns, bundles: list[Bundle]) -> np.ndarray:
    """One merged column per bundle; on a conflicting row the later feature wins."""
    C = np.asarray(columns).astype(np.int64)
    out = np.zeros((C.shape[0], len(bundles)), dtype=np.int64)
    for j, b in enumerate(bundles):
        for f, off in zip(b.features, b.offsets):
            nzr = C[:, f] != 0
            out[nzr, j] = C[nzr, f] + off
    return out


def efb_unbundle(merged, bundles: list[Bundle], n_features: int) -> np.ndarray:
    M = np.asarray(merged, dtype=np.int64)
    out = np.zeros((M.shape[0], n_features), dtype=np.int64)
    for j, b in enumerate(bundles):
        v = M[:, j]
        for f, off, span in zip(b.features, b.offsets, b.spans):
            mine = (v > off) & (v <= off + span)
            out[mine, f] = v[mine] - off
    return out


# ---- histogram machinery -------------------------------------------------


class FeatureBinner:
    """Per-feature thresholds; ``bin(x)`` counts the thresholds strictly below ``x``.

    A feature with at most ``n_bins`` distinct values gets a threshold at
    every midpoint between neighbours (exact splits); otherwise thresholds
    are de-duplicated quantile cut points.
    """

    def __init__(self, n_bins: int = 255):
        self.n_bins = n_bins
        self.thresholds: list[np.ndarray] = []

    def fit(self, X: np.ndarray) -> "FeatureBinner":
        self.thresholds = []
        for j in range(X.shape[1]):
            u = np.unique(X[:, j])
            if len(u) <= self.n_bins:
                t = 0.5 * (u[:-1] + u[1:])
            else:
                qs = np.linspace(0.0, 1.0, self.n_bins + 1)[1:-1]
                t = np.unique(np.quantile(X[:, j], qs))
                t = t[t < u[-1]]
            self.thresholds.append(t.astype(float))
        return self

    @property
    def n_bins_per_feature(self) -> np.ndarray:
        return np.array([len(t) + 1 for t in self.thresholds], dtype=np.int64)

    def transform(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(X.shape, dtype=np.int64)
        for j, t in enumerate(self.thresholds):
            out[:, j] = np.searchsorted(t, X[:, j], side="left")
        return out


@dataclass
class Histogram:
    """Flat per-feature bin aggregates; feature ``j`` owns ``starts[j]:starts[j+1]``."""

    grad: np.ndarray
    hess: np.ndarray
    count: np.ndarray

    def __sub__(self, other: "Histogram") -> "Histogram":
        return Histogram(self.grad - other.grad, self.hess - other.hess, self.count - other.count)


class _HistBuilder:
    def __init__(self, Xb: np.ndarray, nbins: np.ndarray, bundles: list[Bundle] | None):
        self.d = Xb.shape[1]
        self.nbins = nbins
        self.starts = np.concatenate([[0], np.cumsum(nbins)]).astype(np.int64)
        self.total_bins = int(self.starts[-1])
        self.bundles = bundles
        if bundles is None:
            codes = Xb + self.starts[:-1][None, :]
            self.code_bins = self.total_bins
        else:
            merged = efb_merge(Xb, bundles)
            widths = np.array([b.n_values for b in bundles], dtype=np.int64)
            self.mstarts = np.concatenate([[0], np.cumsum(widths)]).astype(np.int64)
            codes = merged + self.mstarts[:-1][None, :]
            self.code_bins = int(self.mstarts[-1])
        self.codes = np.ascontiguousarray(codes, dtype=np.int64)

    def build(self, rows: np.ndarray, g: np.ndarray, h: np.ndarray) -> Histogram:
        G, H, C = build_histogram(self.codes, rows, g, h, self.code_bins)
        if self.bundles is None:
            return Histogram(G, H, C)
        return self._expand(G, H, C)

    def _expand(self, G, H, C) -> Histogram:
        """Map bundle histograms back onto per-feature bins.

        Bin 0 of each feature (its "zero" bin, never stored in the bundle)
        is recovered as the node total minus the feature's other bins.
        """
        outs = []
        for src in (G, H, C):
            out = np.zeros(self.total_bins)
            for j, b in enumerate(self.bundles):
                base = self.mstarts[j]
                tot = src[base : self.mstarts[j + 1]].sum()
                for f, off in zip(b.features, b.offsets):
                    s, nb = self.starts[f], self.nbins[f]
                    vals = src[base + off + 1 : base + off + nb]
                    out[s + 1 : s + nb] = vals
                    out[s] = tot - vals.sum()
            outs.append(out)
        return Histogram(*outs)


@dataclass(eq=False)
class _Leaf:
    rows: np.ndarray
    depth: int
    hist: Histogram
    G: float
    H: float
    node: int
    split: tuple | None = None  # (gain, feature, bin, G_left, H_left)


class _RegTreeGrower:
    """Leaf-wise (best-gain-first) growth of one regression tree on binned data."""

    def __init__(self, XbT: np.ndarray, builder: _HistBuilder, params: GbmParams):
        self.XbT = XbT
        self.b = builder
        self.p = params

    def _consider(self, leaf: _Leaf) -> None:
        p = self.p
        if p.max_depth is not None and leaf.depth >= p.max_depth:
            return
        gain, f, b, gl, hl = best_bin_split(
            leaf.hist.grad, leaf.hist.hess, leaf.hist.count, self.b.starts,
            leaf.G, leaf.H, float(len(leaf.rows)),
            float(p.min_data_in_leaf), p.min_sum_hessian_in_leaf, p.leaf_l2,
        )
        if f >= 0:
            leaf.split = (gain, int(f), int(b), gl, hl)

    def grow(self, rows: np.ndarray, g: np.ndarray, h: np.ndarray, importance: np.ndarray):
        """Return flat node arrays (threshold in bin units) and the final leaves."""
        p = self.p
        feature, threshold, left, right = [-1], [math.nan], [-1], [-1]
        root = _Leaf(rows, 0, self.b.build(rows, g, h), float(g[rows].sum()), float(h[rows].sum()), 0)
        self._consider(root)
        heap = []
        if root.split is not None:
            heap.append((-root.split[0], 0, root))
        leaves = {0: root}
        counter = 1
        while heap and len(leaves) < p.num_leaves:
            _, _, leaf = heapq.heappop(heap)
            gain, f, b, gl, hl = leaf.split
            go_left = self.XbT[f, leaf.rows] <= b
            lrows, rrows = leaf.rows[go_left], leaf.rows[~go_left]
            if len(lrows) <= len(rrows):
                lh = self.b.build(lrows, g, h)
                rh = leaf.hist - lh
            else:
                rh = self.b.build(rrows, g, h)
                lh = leaf.hist - rh
            feature[leaf.node] = f
            threshold[leaf.node] = float(b)
            importance[f] += gain
            ln, rn = len(feature), len(feature) + 1
            feature += [-1, -1]
            threshold += [math.nan, math.nan]
            left += [-1, -1]
            right += [-1, -1]
            left[leaf.node], right[leaf.node] = ln, rn
            del leaves[leaf.node]
            for child in (
                _Leaf(lrows, leaf.depth + 1, lh, gl, hl, ln),
                _Leaf(rrows, leaf.depth + 1, rh, leaf.G - gl, leaf.H - hl, rn),
            ):
                leaves[child.node] = child
                self._consider(child)
                if child.split is not None:
                    heapq.heappush(heap, (-child.split[0], counter, child))
                    counter += 1
        value = np.zeros(len(feature))
        for leaf in leaves.values():
            if leaf.H + p.leaf_l2 > 0:
                value[leaf.node] = leaf_weight(leaf.G, max(leaf.H, 0.0), p.leaf_l2)
        return (
            np.array(feature, dtype=np.int64),
            np.array(threshold),
            np.array(left, dtype=np.int64),
            np.array(right, dtype=np.int64),
            value,
            list(leaves.values()),
        )


@dataclass(frozen=True)
class RegressionTree:
    feature: np.ndarray
    threshold: np.ndarray  # raw-feature threshold; go left when x <= threshold
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "_flat", _FlatTree(self.feature, self.threshold, self.left, self.right))

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self._flat.apply(X)]

    @property
    def n_leaves(self) -> int:
        return int((self.feature < 0).sum())

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": [None if f < 0 else t for f, t in zip(self.feature.tolist(), self.threshold.tolist())],
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RegressionTree":
        return cls(
            np.array(d["feature"], dtype=np.int64),
            np.array([math.nan if t is None else t for t in d["threshold"]], dtype=float),
            np.array(d["left"], dtype=np.int64),
            np.array(d["right"], dtype=np.int64),
            np.array(d["value"], dtype=float),
        )


@dataclass(frozen=True)
class GbmModel:
    prior_scores: np.ndarray
    stages: tuple[tuple[RegressionTree, ...], ...]
    learning_rate: float
    n_features: int
    importance: np.ndarray
    train_loss: tuple[float, ...] = field(default=(), compare=False)

    @property
    def n_classes(self) -> int:
        return len(self.prior_scores)

    def raw_scores(self, X) -> np.ndarray:
        X = _check_width(X, self.n_features)
        scores = np.tile(self.prior_scores, (X.shape[0], 1))
        for trees in self.stages:
            for c, tree in enumerate(trees):
                scores[:, c] += self.learning_rate * tree.predict(X)
        return scores

    def predict_proba(self, X) -> np.ndarray:
        return softmax(self.raw_scores(X))

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.raw_scores(X), axis=1)

    def to_dict(self) -> dict:
        return {
            "prior_scores": self.prior_scores.tolist(),
            "learning_rate": self.learning_rate,
            "n_features": self.n_features,
            "importance": self.importance.tolist(),
            "stages": [[t.to_dict() for t in trees] for trees in self.stages],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GbmModel":
        return cls(
            np.array(d["prior_scores"], dtype=float),
            tuple(tuple(RegressionTree.from_dict(t) for t in trees) for trees in d["stages"]),
            float(d["learning_rate"]),
            int(d["n_features"]),
            np.array(d["importance"], dtype=float),
        )


def softmax(scores: np.ndarray) -> np.ndarray:
    z = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def log_loss(y: np.ndarray, proba: np.ndarray) -> float:
    p = np.clip(proba[np.arange(len(y)), y], 1e-300, None)
    return float(-np.log(p).mean())


def class_log_priors(y: np.ndarray, K: int) -> np.ndarray:
    counts = np.bincount(y, minlength=K).astype(float)
    if (counts == 0).any():
        counts += 1.0
    return np.log(counts / counts.sum())


def fit_gbm(X, y, params: GbmParams = GbmParams(), n_classes: int | None = None) -> GbmModel:
    """Softmax gradient boosting with one leaf-wise histogram tree per class per stage.

    Gradients ``p - onehot`` and hessians ``p (1 - p)`` drive split gains
    ``0.5 [GL^2/(HL+l) + GR^2/(HR+l) - G^2/(H+l)]`` and leaf weights
    ``-G / (H + l)``; scores advance by ``learning_rate`` times each tree.
    """
    X, y = _check_xy(X, y)
    n, d = X.shape
    K = int(n_classes if n_classes is not None else y.max() + 1)
    if K < 2:
        raise GbmError("gradient boosting needs at least 2 classes")
    if params.min_data_in_leaf > n:
        raise GbmError(f"min_data_in_leaf={params.min_data_in_leaf} exceeds {n} rows")

    prior = class_log_priors(y, K)
    scores = np.tile(prior, (n, 1))
    onehot = np.zeros((n, K))
    onehot[np.arange(n), y] = 1.0
    losses = [log_loss(y, softmax(scores))]
    importance = np.zeros(d)
    stages: list[tuple[RegressionTree, ...]] = []
    if params.n_estimators == 0:
        return GbmModel(prior, (), params.learning_rate, d, importance, tuple(losses))

    binner = FeatureBinner(params.n_bins).fit(X)
    Xb = binner.transform(X)
    bundles = None
    if params.efb_max_conflict is not None:
        bundles = efb_bundle(Xb, params.efb_max_conflict)
        logger.info("EFB: %d features -> %d bundles", d, len(bundles))
    builder = _HistBuilder(Xb, binner.n_bins_per_feature, bundles)
    XbT = np.ascontiguousarray(Xb.T)
    grower = _RegTreeGrower(XbT, builder, params)
    rng = np.random.default_rng(params.seed)
    all_rows = np.arange(n)
    lr = params.learning_rate

    proba = softmax(scores)
    for m in range(params.n_estimators):
        grad = proba - onehot
        hess = proba * (1.0 - proba)
        rows = all_rows
        sample_w = None
        if params.goss_enabled:
            rows, sample_w = goss_sample(
                np.abs(grad).sum(axis=1), params.goss_top_fraction, params.goss_other_fraction, rng
            )
        trees = []
        for c in range(K):
            g = np.ascontiguousarray(grad[:, c])
            h = np.ascontiguousarray(hess[:, c])
            if sample_w is not None:
                g[rows] *= sample_w
                h[rows] *= sample_w
            feat, thr_bin, left, right, value, leaves = grower.grow(rows, g, h, importance)
            raw_thr = np.array(
                [binner.thresholds[f][int(b)] if f >= 0 else math.nan for f, b in zip(feat, thr_bin)]
            )
            trees.append(RegressionTree(feat, raw_thr, left, right, value))
            if sample_w is None:
                for leaf in leaves:
                    scores[leaf.rows, c] += lr * value[leaf.node]
            else:
                # rows left out by GOSS still need routing; bin <= b iff x <= threshold
                scores[:, c] += lr * value[_FlatTree(feat, thr_bin, left, right).apply(Xb)]
        stages.append(tuple(trees))
        proba = softmax(scores)
        losses.append(log_loss(y, proba))
    return GbmModel(prior, tuple(stages), lr, d, importance, tuple(losses))


def gbm_predict(model: GbmModel, x) -> tuple[int, np.ndarray]:
    p = model.predict_proba(np.asarray(x, dtype=float)[None, :])[0]
    return int(np.argmax(p)), p
