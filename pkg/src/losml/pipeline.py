"""Config-driven end-to-end runs: load, clean, encode, reduce, split, fit, evaluate, emit."""

from __future__ import annotations

import csv
import json
import logging
import os
import shutil
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from . import _kernels
from .dataset import (
    DEFAULT_DROP,
    CleanReport,
    ColumnSchema,
    Dataset,
    DatasetError,
    ProfileReport,
    clean,
    drop_columns,
    load_csv,
    profile,
    sparcs_schema,
    write_profile,
)
from .decomposition import PcaModel, fit_pca, pca_transform, save_pca, select_components, write_variance_curve
from .encoding import (
    DEFAULT_ORDERS,
    PAPER_BINS,
    BinSpec,
    FeatureMatrix,
    LabelVector,
    OrdinalMap,
    StandardizerParams,
    build_design_matrix,
    fit_encoders,
    fit_standardizer,
    load_encoders,
    save_encoders,
    standardize,
)
from .evaluation import (
    ConfusionMatrix,
    MetricsReport,
    evaluate,
    stratified_split,
    write_metrics_json,
    write_metrics_table,
)
from .learners import FeatureImportance, TreeParams, feature_importance, fit_tree
from .models import DISPLAY_NAMES, FAMILIES, PAPER_PRESETS, fit_model, load_model, make_params, params_to_dict, save_model
from .tuning import DEFAULT_SPACES, SearchResult, SearchSpace, random_search, write_trials_csv

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Invalid pipeline configuration."""


class PipelineError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

# Every accepted key with its default; dict-valued settings are leaves.
CONFIG_DEFAULTS: dict[str, Any] = {
    "input.path": None,
    "input.mapping": {},
    "input.schema": None,
    "clean.drop": list(DEFAULT_DROP),
    "encode.orders": None,
    "encode.standardize": False,
    "bins.edges": None,
    "pca.enabled": False,
    "pca.threshold": 0.95,
    "select.top_k": None,
    "model.family": "gbm",
    "model.preset": None,
    "model.params": None,
    "model.search": None,
    "search.n_trials": 25,
    "search.objective": "f1",
    "split.test_fraction": 0.2,
    "split.seed": None,
    "seed": 42,
    "metrics.average": "weighted",
    "output.dir": None,
    "report.max_scatter_rows": 5000,
}


def flatten_config(doc: Mapping[str, Any], prefix: str = "") -> dict[str, Any]:
    """Accept dotted flat keys, nested sections, or a mix of both."""
    out: dict[str, Any] = {}
    for k, v in doc.items():
        key = f"{prefix}{k}"
        if key in CONFIG_DEFAULTS:
            out[key] = v
        elif isinstance(v, Mapping):
            out.update(flatten_config(v, key + "."))
        else:
            raise ConfigError(f"unknown config key {key!r}")
    return out


@dataclass
class PipelineConfig:
    input_path: Path | None
    mapping: dict[str, str]
    schema: list[ColumnSchema]
    drop: list[str]
    orders: dict[str, tuple[str, ...]]
    standardize: bool
    bins: BinSpec
    pca_enabled: bool
    pca_threshold: float
    select_top_k: int | None
    family: str
    preset: str | None
    params: dict | None
    search: SearchSpace | None
    n_trials: int
    objective: str
    test_fraction: float
    split_seed: int
    seed: int
    average: str
    output_dir: Path | None
    max_scatter_rows: int
    raw: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any], base_dir: Path | None = None) -> "PipelineConfig":
        flat = {**CONFIG_DEFAULTS, **flatten_config(doc)}
        family = flat["model.family"]
        if family not in FAMILIES:
            raise ConfigError(f"model.family must be one of {FAMILIES}, got {family!r}")
        chosen = [k for k in ("model.preset", "model.params", "model.search") if flat[k] is not None]
        if len(chosen) > 1:
            raise ConfigError(f"choose exactly one of model.preset / model.params / model.search, got {chosen}")
        preset = flat["model.preset"]
        if not chosen:
            preset = "paper"
        if preset is not None and preset != "paper":
            raise ConfigError(f"unknown preset {preset!r}; only 'paper' is available")
        search = flat["model.search"]
        if search is not None:
            try:
                search = SearchSpace.from_dict(DEFAULT_SPACES[family] if search == "default" else search)
            except (ValueError, AttributeError, KeyError, TypeError) as exc:
                raise ConfigError(f"bad model.search: {exc}") from None
        if flat["pca.enabled"] and flat["select.top_k"] is not None:
            raise ConfigError("pca.enabled and select.top_k are alternative stages; set only one")
        if not 0 < float(flat["pca.threshold"]) <= 1:
            raise ConfigError("pca.threshold must lie in (0, 1]")
        if not 0 < float(flat["split.test_fraction"]) < 1:
            raise ConfigError("split.test_fraction must lie in (0, 1)")
        try:
            if flat["input.schema"] is None:
                schema = sparcs_schema()
            else:
                schema = [ColumnSchema(c["name"], c["kind"], bool(c.get("required", False))) for c in flat["input.schema"]]
            bins = PAPER_BINS if flat["bins.edges"] is None else BinSpec(tuple(tuple(e) for e in flat["bins.edges"]))
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"bad schema or bins: {exc}") from None

        def resolve(p):
            if p is None:
                return None
            p = Path(p)
            return p if p.is_absolute() or base_dir is None else base_dir / p

        seed = int(flat["seed"])
        orders = DEFAULT_ORDERS if flat["encode.orders"] is None else flat["encode.orders"]
        return cls(
            input_path=resolve(flat["input.path"]),
            mapping=dict(flat["input.mapping"]),
            schema=schema,
            drop=list(flat["clean.drop"]),
            orders={k: tuple(v) for k, v in orders.items()},
            standardize=bool(flat["encode.standardize"]),
            bins=bins,
            pca_enabled=bool(flat["pca.enabled"]),
            pca_threshold=float(flat["pca.threshold"]),
            select_top_k=None if flat["select.top_k"] is None else int(flat["select.top_k"]),
            family=family,
            preset=preset,
            params=flat["model.params"],
            search=search,
            n_trials=int(flat["search.n_trials"]),
            objective=flat["search.objective"],
            test_fraction=float(flat["split.test_fraction"]),
            split_seed=seed if flat["split.seed"] is None else int(flat["split.seed"]),
            seed=seed,
            average=flat["metrics.average"],
            output_dir=resolve(flat["output.dir"]),
            max_scatter_rows=int(flat["report.max_scatter_rows"]),
            raw={k: v for k, v in flat.items()},
        )

    def model_values(self) -> dict:
        if self.params is not None:
            return dict(self.params)
        if self.preset == "paper":
            return dict(PAPER_PRESETS[self.family])
        return {}

    def to_dict(self) -> dict:
        d = dict(self.raw)
        d["input.path"] = None if self.input_path is None else str(self.input_path)
        d["output.dir"] = None if self.output_dir is None else str(self.output_dir)
        return d


def load_config(
    path: str | Path | None,
    overrides: Mapping[str, Any] | None = None,
    defaults: Mapping[str, Any] | None = None,
    clear: tuple[str, ...] = (),
) -> PipelineConfig:
    """Read a JSON config; ``defaults`` sit under the file, ``overrides`` over it.

    Keys in ``clear`` are removed from the file before merging.
    """
    doc: dict = {}
    base = None
    if path is not None:
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: top level must be an object")
        base = path.parent
    flat = dict(defaults or {})
    flat.update({k: v for k, v in flatten_config(doc).items() if k not in clear})
    flat.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return PipelineConfig.from_dict(flat, base)


# --------------------------------------------------------------------------
# stages
# --------------------------------------------------------------------------


@dataclass
class PreparedData:
    dataset: Dataset
    clean_report: CleanReport


def prepare_dataset(config: PipelineConfig, dataset: Dataset | None = None) -> PreparedData:
    report = CleanReport()
    if dataset is None:
        if config.input_path is None:
            raise ConfigError("input.path is required")
        dataset = load_csv(config.input_path, config.schema, config.mapping)
    ds = drop_columns(dataset, config.drop, report)
    ds, report = clean(ds, report=report)
    return PreparedData(ds, report)


@dataclass
class FeaturePipeline:
    """Everything needed to turn a cleaned table into model inputs."""

    maps: dict[str, OrdinalMap]
    bins: BinSpec
    standardizer: StandardizerParams | None = None
    pca: PcaModel | None = None
    n_components: int | None = None
    selected: list[int] | None = None

    def transform(self, ds: Dataset) -> tuple[FeatureMatrix, LabelVector]:
        X, y = build_design_matrix(ds, self.maps, self.bins)
        return self.transform_matrix(X), y

    def transform_matrix(self, X: FeatureMatrix) -> FeatureMatrix:
        if self.standardizer is not None:
            X = standardize(self.standardizer, X)
        if self.pca is not None:
            X = pca_transform(self.pca, X, self.n_components)
        if self.selected is not None:
            X = X.select(self.selected)
        return X

    def save(self, out_dir: Path) -> dict[str, Path]:
        written = {"encoders": save_encoders(out_dir / "encoders.json", self.maps, self.bins, self.standardizer)}
        if self.pca is not None:
            written["pca_model"] = save_pca(self.pca, out_dir / "pca.json")
        doc = {"n_components": self.n_components, "selected_features": self.selected}
        p = out_dir / "features.json"
        p.write_text(json.dumps(doc, indent=2, sort_keys=True))
        written["features"] = p
        return written

    @classmethod
    def load(cls, run_dir: Path) -> "FeaturePipeline":
        maps, bins, std = load_encoders(run_dir / "encoders.json")
        doc = json.loads((run_dir / "features.json").read_text())
        pca = None
        if (run_dir / "pca.json").exists():
            pca = PcaModel.from_dict(json.loads((run_dir / "pca.json").read_text()))
        return cls(maps, bins, std, pca, doc["n_components"], doc["selected_features"])


@dataclass
class RunArtifacts:
    config: PipelineConfig
    dataset: Dataset
    clean_report: CleanReport
    profile: ProfileReport
    features: FeaturePipeline
    labels: LabelVector
    feature_names: tuple[str, ...]
    train_idx: np.ndarray
    test_idx: np.ndarray
    family: str
    params: Any
    model: Any
    confusion: ConfusionMatrix
    report: MetricsReport
    importance: FeatureImportance | None
    search: SearchResult | None
    run_log: dict


def _select_features(X: FeatureMatrix, y: LabelVector, k: int, seed: int) -> list[int]:
    """Top-k columns by the importance of a tree fitted with the published settings."""
    params = make_params("tree", PAPER_PRESETS["tree"], seed=seed)
    tree = fit_tree(X.values, y.labels, params, y.n_classes)
    imp = feature_importance(tree, X.feature_names)
    pos = {n: j for j, n in enumerate(X.feature_names)}
    return sorted(pos[n] for n in imp.top(min(k, X.shape[1])))


def _prediction_ties(model, X: np.ndarray) -> int:
    proba = np.asarray(model.predict_proba(X))
    top = proba.max(axis=1, keepdims=True)
    return int(((proba == top).sum(axis=1) > 1).sum())


def run_pipeline(config: PipelineConfig, dataset: Dataset | None = None, emit: bool = True) -> RunArtifacts:
    """Run every stage and, when ``emit``, write artifacts under ``config.output_dir``.

    Files are staged in a scratch directory and moved into place only after
    every stage succeeded, so a failed run leaves no partial output.
    """
    stage = "load"
    run_log: dict[str, Any] = {"config": config.to_dict(), "seeds": {}, "numba": _kernels.HAVE_NUMBA}
    try:
        prepared = prepare_dataset(config, dataset)
        ds = prepared.dataset
        run_log["clean"] = prepared.clean_report.to_dict()

        stage = "profile"
        prof = profile(ds)
        run_log["degenerate_correlations"] = [f"{c.a} ~ {c.b}" for c in prof.correlations if c.degenerate]

        stage = "encode"
        maps = fit_encoders(ds, config.orders)
        X, y = build_design_matrix(ds, maps, config.bins)
        run_log["unknown_codes"] = {
            name: int(np.count_nonzero(X.values[:, X.feature_names.index(name)] == 0))
            for name in maps
        }

        stage = "split"
        train_idx, test_idx = stratified_split(y, config.test_fraction, config.split_seed)
        run_log["seeds"]["split"] = config.split_seed
        run_log["split"] = {"n_train": int(len(train_idx)), "n_test": int(len(test_idx))}

        stage = "reduce"
        features = FeaturePipeline(maps, config.bins)
        X_train = X.take(train_idx)
        if config.standardize or config.pca_enabled:
            features.standardizer = fit_standardizer(X_train)
            run_log["zero_variance_features"] = [
                n for n, z in zip(X.feature_names, features.standardizer.zero_variance) if z
            ]
        if config.pca_enabled:
            features.pca = fit_pca(standardize(features.standardizer, X_train))
            features.n_components = select_components(features.pca.explained_ratio, config.pca_threshold)
            run_log["pca"] = {"n_components": features.n_components, "degenerate": features.pca.degenerate}
        if config.select_top_k is not None:
            features.selected = _select_features(X_train, y.take(train_idx), config.select_top_k, config.seed)
            run_log["selected_features"] = [X.feature_names[j] for j in features.selected]
        Z = features.transform_matrix(X)
        Z_train, Z_test = Z.take(train_idx), Z.take(test_idx)
        y_train, y_test = y.take(train_idx), y.take(test_idx)

        search = None
        values = config.model_values()
        if config.search is not None:
            stage = "search"
            # search validates on a stratified slice of the training rows only
            inner_tr, inner_va = stratified_split(y_train, 0.2, config.seed)
            search = random_search(
                config.search, config.n_trials, config.seed, config.objective, config.family,
                Z_train.take(inner_tr), y_train.take(inner_tr), Z_train.take(inner_va), y_train.take(inner_va),
                n_classes=y.n_classes,
            )
            values = dict(search.best_params)
            run_log["seeds"]["search"] = config.seed
            run_log["search"] = {"best_index": search.best_index, "best_objective": search.best_objective,
                                 "failed_trials": sum(t.failed for t in search.trials)}

        stage = "fit"
        params = make_params(config.family, values, seed=config.seed)
        run_log["seeds"]["model"] = getattr(params, "seed", None)
        model = fit_model(config.family, Z_train, y_train, params, y.n_classes)

        stage = "evaluate"
        pred = model.predict(Z_test.values)
        cm, report = evaluate(y_test.labels, pred, y.n_classes, config.average)
        run_log["degenerate_metrics"] = list(report.degenerate)
        run_log["prediction_ties"] = _prediction_ties(model, Z_test.values)
        importance = None
        if hasattr(model, "importance"):
            importance = feature_importance(model, Z.feature_names)
            run_log["importance_degenerate"] = importance.degenerate

        artifacts = RunArtifacts(
            config, ds, prepared.clean_report, prof, features, y, Z.feature_names, train_idx, test_idx,
            config.family, params, model, cm, report, importance, search, run_log,
        )
        if emit:
            stage = "emit"
            if config.output_dir is None:
                raise ConfigError("output.dir is required")
            _emit_atomically(artifacts, config.output_dir)
        return artifacts
    except ConfigError:
        raise
    except Exception as exc:
        raise PipelineError(stage, exc) from exc


def _emit_atomically(artifacts: RunArtifacts, out_dir: Path) -> dict:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=".staging-", dir=out_dir))
    try:
        manifest = emit_report(artifacts, staging)
        for entry in manifest["files"]:
            os.replace(staging / entry["path"], out_dir / entry["path"])
        os.replace(staging / "manifest.json", out_dir / "manifest.json")
        return manifest
    finally:
        shutil.rmtree(staging, ignore_errors=True)


# --------------------------------------------------------------------------
# report emission
# --------------------------------------------------------------------------


def _write_rows(path: Path, header, rows) -> Path:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path


def write_bin_counts(labels: LabelVector, bins: BinSpec, path: Path) -> Path:
    counts = np.bincount(labels.labels, minlength=bins.n_classes)
    return _write_rows(
        path,
        ["bin", "label", "low_days", "high_days", "count"],
        [[k, bins.labels[k], lo, hi, int(counts[k])] for k, (lo, hi) in enumerate(bins.edges)],
    )


def write_importance(importance: FeatureImportance, path: Path) -> Path:
    return _write_rows(path, ["feature", "score"], [[n, repr(s)] for n, s in importance.items])


def _cost_los_tables(ds: Dataset, out_dir: Path, max_rows: int, seed: int) -> dict[str, Path]:
    written = {}
    los = ds[ds.los_name].astype(float)
    currency = [n for n in ds.names if ds.kinds[n] == "currency"]
    if not currency:
        return written
    rows = np.arange(ds.n_rows)
    if ds.n_rows > max_rows:
        rows = np.sort(np.random.default_rng(seed).choice(ds.n_rows, size=max_rows, replace=False))
    written["cost_los"] = _write_rows(
        out_dir / "cost_los.csv",
        ["length_of_stay"] + currency,
        [[int(los[i])] + [repr(float(ds[c][i])) for c in currency] for i in rows],
    )
    by_day = []
    for d in np.unique(los):
        m = los == d
        by_day.append([int(d), int(m.sum())] + [repr(float(ds[c][m].mean())) for c in currency])
    written["cost_by_los"] = _write_rows(
        out_dir / "cost_by_los.csv", ["length_of_stay", "count"] + [f"mean_{c}" for c in currency], by_day
    )
    diag = "CCS Diagnosis Code" if "CCS Diagnosis Code" in ds.columns else None
    if diag is not None:
        codes = ds[diag]
        cost = ds[currency[-1]]
        table = []
        for code in np.unique(codes):
            m = codes == code
            table.append([repr(float(code)), int(m.sum()), repr(float(los[m].mean())), repr(float(cost[m].mean()))])
        table.sort(key=lambda r: -float(r[3]))
        written["diagnosis_cost_los"] = _write_rows(
            out_dir / "diagnosis_cost_los.csv", [diag, "count", "mean_los", f"mean_{currency[-1]}"], table
        )
    return written


def emit_report(artifacts: RunArtifacts, out_dir: str | Path) -> dict:
    """Write every plot-ready table, model and metrics file; return the manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    a = artifacts
    written: dict[str, Path] = {}
    skipped: dict[str, str] = {}

    written.update(write_profile(a.profile, out_dir))
    written.update(_cost_los_tables(a.dataset, out_dir, a.config.max_scatter_rows, a.config.seed))
    written["bin_counts"] = write_bin_counts(a.labels, a.features.bins, out_dir / "bin_counts.csv")
    written.update(a.features.save(out_dir))
    if a.features.pca is not None:
        written["pca_variance"] = write_variance_curve(a.features.pca, out_dir / "pca_variance.csv")
    else:
        skipped["pca_variance"] = "pca disabled"
    if a.importance is not None:
        written["feature_importance"] = write_importance(a.importance, out_dir / "feature_importance.csv")
    else:
        skipped["feature_importance"] = f"{a.family} exposes no split importances"
    written["model"] = save_model(a.model, out_dir / "model.json", a.params)
    written["metrics"] = write_metrics_json(
        a.report, a.confusion, out_dir / "metrics.json",
        model=a.family, n_test=int(len(a.test_idx)), n_train=int(len(a.train_idx)),
        feature_names=list(a.feature_names),
    )
    written["metrics_table"] = write_metrics_table([(DISPLAY_NAMES[a.family], a.report)], out_dir / "metrics.csv")
    written["confusion_matrix"] = _write_rows(
        out_dir / "confusion_matrix.csv",
        ["actual"] + [f"pred_{k}" for k in range(a.confusion.n_classes)],
        [[k] + row for k, row in enumerate(a.confusion.counts.tolist())],
    )
    if a.search is not None:
        written["trials"] = write_trials_csv(a.search, out_dir / "trials.csv")
        p = out_dir / "search.json"
        p.write_text(json.dumps({"space": a.config.search.to_dict(), **a.search.to_dict()}, indent=2, sort_keys=True))
        written["search"] = p
    p = out_dir / "run_log.json"
    p.write_text(json.dumps(a.run_log, indent=2, sort_keys=True, default=str))
    written["run_log"] = p

    manifest = {
        "files": [{"name": k, "path": v.name} for k, v in sorted(written.items())],
        "skipped": skipped,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return manifest


def evaluate_run(run_dir: str | Path, config: PipelineConfig, dataset: Dataset | None = None) -> tuple[ConfusionMatrix, MetricsReport]:
    """Score a saved run's model on a (new) input table."""
    run_dir = Path(run_dir)
    features = FeaturePipeline.load(run_dir)
    model = load_model(run_dir / "model.json")
    prepared = prepare_dataset(config, dataset)
    X, y = features.transform(prepared.dataset)
    return evaluate(y.labels, model.predict(X.values), y.n_classes, config.average)


def combine_metrics(run_dirs, path: str | Path) -> Path:
    """Stack several runs' headline metrics into one Table-layout CSV."""
    rows = []
    for d in run_dirs:
        doc = json.loads((Path(d) / "metrics.json").read_text())
        m = doc["metrics"]
        agg = m[m["average"]]
        name = DISPLAY_NAMES.get(doc.get("model"), doc.get("model", Path(d).name))
        rows.append([name, repr(m["accuracy"]), repr(agg["precision"]), repr(agg["recall"]),
                     repr(agg["f1"]), repr(m["cohen_kappa"]), repr(m["mcc"])])
    return _write_rows(Path(path), ["Model", "Accuracy", "Precision", "Recall", "F1", "Kappa", "MCC"], rows)


__all__ = [
    "ConfigError", "PipelineError", "PipelineConfig", "RunArtifacts", "FeaturePipeline",
    "load_config", "run_pipeline", "emit_report", "evaluate_run", "combine_metrics", "prepare_dataset",
    "DatasetError", "params_to_dict",
]
