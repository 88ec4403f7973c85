"""Loading, cleaning and profiling of inpatient discharge tables.

A :class:`Dataset` is a small immutable columnar table: every column is a
1-D numpy array. Categorical columns hold ``object`` arrays of ``str`` with
``None`` for missing cells; numeric and currency columns hold ``float64``
with ``NaN`` for missing cells. The length-of-stay column is ``float64``
(``NaN`` = missing) straight after loading and ``int64`` once cleaned.
"""

from __future__ import annotations

import csv
import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

logger = logging.getLogger(__name__)

KINDS = ("categorical", "numeric", "currency", "los")
LOS_CAP = 120
UNKNOWN = "Unknown"


class DatasetError(ValueError):
    """Raised for malformed input tables."""


class LosParseError(DatasetError):
    pass


@dataclass(frozen=True)
class ColumnSchema:
    name: str
    kind: str
    required: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DatasetError(f"unknown column kind {self.kind!r} for {self.name!r}")


def validate_schema(schema: Sequence[ColumnSchema]) -> None:
    names = [c.name for c in schema]
    dupes = sorted({n for n in names if names.count(n) > 1})
    if dupes:
        raise DatasetError(f"duplicate schema column names: {dupes}")
    n_los = sum(c.kind == "los" for c in schema)
    if n_los != 1:
        raise DatasetError(f"schema must contain exactly one los column, found {n_los}")


# Default column layout of the public SPARCS de-identified discharge export.
SPARCS_COLUMNS: tuple[tuple[str, str], ...] = (
    ("Health Service Area", "categorical"),
    ("Facility Id", "numeric"),
    ("Age Group", "categorical"),
    ("Zip Code - 3 digits", "categorical"),
    ("Gender", "categorical"),
    ("Race", "categorical"),
    ("Type of Admission", "categorical"),
    ("Patient Disposition", "categorical"),
    ("CCS Diagnosis Code", "numeric"),
    ("CCS Procedure Code", "numeric"),
    ("APR DRG Code", "numeric"),
    ("APR MDC Code", "numeric"),
    ("APR Severity of Illness Code", "numeric"),
    ("APR Severity of Illness Description", "categorical"),
    ("APR Risk of Mortality", "categorical"),
    ("APR Medical Surgical Description", "categorical"),
    ("Payment Typology 1", "categorical"),
    ("Payment Typology 2", "categorical"),
    ("Payment Typology 3", "categorical"),
    ("Attending Provider License Number", "categorical"),
    ("License Number", "categorical"),
    ("Emergency Department Indicator", "categorical"),
    ("Total Charges", "currency"),
    ("Total Costs", "currency"),
    ("Length of Stay", "los"),
)

DEFAULT_DROP = (
    "License Number",
    "Payment Typology 2",
    "Payment Typology 3",
    "Zip Code - 3 digits",
    "Facility Id",
    "Attending Provider License Number",
)


def sparcs_schema(required: Iterable[str] = ("Length of Stay",)) -> list[ColumnSchema]:
    req = set(required)
    return [ColumnSchema(name, kind, name in req) for name, kind in SPARCS_COLUMNS]


@dataclass(frozen=True)
class Dataset:
    columns: Mapping[str, np.ndarray]
    kinds: Mapping[str, str]

    def __post_init__(self):
        if set(self.columns) != set(self.kinds):
            raise DatasetError("column and kind maps disagree")
        lengths = {len(v) for v in self.columns.values()}
        if len(lengths) > 1:
            raise DatasetError(f"ragged columns: lengths {sorted(lengths)}")

    @property
    def n_rows(self) -> int:
        for v in self.columns.values():
            return len(v)
        return 0

    @property
    def names(self) -> list[str]:
        return list(self.columns)

    @property
    def los_name(self) -> str:
        for name, kind in self.kinds.items():
            if kind == "los":
                return name
        raise DatasetError("dataset has no los column")

    def __getitem__(self, name: str) -> np.ndarray:
        return self.columns[name]

    def take(self, rows: np.ndarray) -> "Dataset":
        return Dataset({k: v[rows] for k, v in self.columns.items()}, dict(self.kinds))

    def schema(self) -> list[ColumnSchema]:
        return [ColumnSchema(n, self.kinds[n], self.kinds[n] == "los") for n in self.columns]


@dataclass
class CleanReport:
    rows_in: int = 0
    rows_dropped: int = 0
    missing_per_column: dict[str, int] = field(default_factory=dict)
    filled_values: dict[str, object] = field(default_factory=dict)
    columns_dropped: list[str] = field(default_factory=list)
    columns_not_found: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "rows_in": self.rows_in,
            "rows_dropped": self.rows_dropped,
            "missing_per_column": dict(self.missing_per_column),
            "filled_values": dict(self.filled_values),
            "columns_dropped": list(self.columns_dropped),
            "columns_not_found": list(self.columns_not_found),
        }


@dataclass(frozen=True)
class MissingPolicy:
    categorical_fill: str = UNKNOWN
    numeric_fill: str = "median"

    def __post_init__(self):
        if self.numeric_fill not in ("median", "zero"):
            raise DatasetError(f"unsupported numeric fill {self.numeric_fill!r}")


# --------------------------------------------------------------------------
# parsing
# --------------------------------------------------------------------------

_LOS_PLUS = re.compile(r"^(\d+)\s*\+$")


def parse_los(raw: str) -> int:
    """Parse a length-of-stay cell; ``"120 +"`` and anything above 120 map to 120."""
    text = str(raw).strip()
    if not text:
        raise LosParseError("empty length of stay")
    m = _LOS_PLUS.match(text)
    digits = m.group(1) if m else text
    if not digits.isdigit():
        raise LosParseError(f"invalid length of stay {raw!r}")
    days = int(digits)
    if days <= 0:
        raise LosParseError(f"invalid length of stay {raw!r}: must be at least 1 day")
    return min(days, LOS_CAP)


def parse_currency(raw: str) -> float:
    text = raw.strip().replace("$", "").replace(",", "")
    return float(text)


def _is_missing(raw: str | None) -> bool:
    return raw is None or not raw.strip()


def load_csv(
    path: str | Path,
    schema: Sequence[ColumnSchema],
    mapping: Mapping[str, str] | None = None,
) -> Dataset:
    """Read a CSV into a Dataset holding exactly the schema columns, in schema order.

    ``mapping`` renames source headers to schema names before matching, so
    exports with different header spellings load through the same schema.
    Optional schema columns absent from the header come back fully missing.
    """
    validate_schema(schema)
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"input file not found: {path}")
    mapping = dict(mapping or {})

    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}: empty file, header row missing") from None
        header = [mapping.get(h.strip(), h.strip()) for h in header]
        pos = {h: i for i, h in enumerate(header)}
        for col in schema:
            if col.name not in pos and (col.required or col.kind == "los"):
                raise DatasetError(f"required column absent: {col.name!r}")
        raw_cols: dict[str, list[str | None]] = {c.name: [] for c in schema}
        wanted = [(c.name, pos.get(c.name)) for c in schema]
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            for name, i in wanted:
                raw_cols[name].append(row[i] if i is not None and i < len(row) else None)

    columns: dict[str, np.ndarray] = {}
    kinds: dict[str, str] = {}
    for col in schema:
        columns[col.name] = _convert(col, raw_cols[col.name])
        kinds[col.name] = col.kind
    ds = Dataset(columns, kinds)
    logger.info("loaded %d rows x %d columns from %s", ds.n_rows, len(columns), path)
    return ds


def _convert(col: ColumnSchema, cells: list[str | None]) -> np.ndarray:
    if col.kind == "categorical":
        out = np.empty(len(cells), dtype=object)
        for i, c in enumerate(cells):
            out[i] = None if _is_missing(c) else c.strip()
        return out

    out = np.full(len(cells), np.nan)
    for i, c in enumerate(cells):
        if _is_missing(c):
            continue
        try:
            if col.kind == "los":
                out[i] = parse_los(c)
            elif col.kind == "currency":
                out[i] = parse_currency(c)
            else:
                out[i] = float(c.strip().replace(",", ""))
        except ValueError as exc:
            # header is line 1, so data row i sits on line i + 2
            where = f"row {i + 1} (line {i + 2}), column {col.name!r}"
            if col.required or col.kind == "los":
                raise DatasetError(f"unparseable value {c!r} at {where}: {exc}") from None
            logger.warning("treating unparseable %r at %s as missing", c, where)
    return out


def write_csv(ds: Dataset, path: str | Path) -> Path:
    """Write a Dataset so that ``load_csv`` with ``ds.schema()`` restores it exactly."""
    path = Path(path)
    names = ds.names
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        cols = [ds[n] for n in names]
        for i in range(ds.n_rows):
            w.writerow([_fmt_cell(ds.kinds[n], col[i]) for n, col in zip(names, cols)])
    return path


def _fmt_cell(kind: str, v) -> str:
    if kind == "categorical":
        return "" if v is None else str(v)
    if v is None or (isinstance(v, float) and np.isnan(v)):
        return ""
    if kind == "los":
        return str(int(v))
    return repr(float(v))


# --------------------------------------------------------------------------
# cleaning
# --------------------------------------------------------------------------


def drop_columns(ds: Dataset, names: Iterable[str], report: CleanReport | None = None) -> Dataset:
    """Return ``ds`` without the listed columns; names not present are ignored."""
    names = list(names)
    present = [n for n in names if n in ds.columns]
    absent = [n for n in names if n not in ds.columns]
    if absent:
        logger.info("drop list names not in dataset: %s", absent)
    if report is not None:
        report.columns_dropped.extend(present)
        report.columns_not_found.extend(absent)
    if ds.los_name in present:
        raise DatasetError("cannot drop the length-of-stay column")
    if not present:
        return ds
    keep = {k: v for k, v in ds.columns.items() if k not in present}
    return Dataset(keep, {k: ds.kinds[k] for k in keep})


def clean(
    ds: Dataset, policy: MissingPolicy = MissingPolicy(), report: CleanReport | None = None
) -> tuple[Dataset, CleanReport]:
    """Drop rows missing the target and impute every other missing cell."""
    report = report if report is not None else CleanReport()
    los_name = ds.los_name
    los = ds[los_name].astype(float)
    keep = ~np.isnan(los)
    report.rows_in = ds.n_rows
    report.rows_dropped = int((~keep).sum())
    if not keep.any():
        raise DatasetError("empty dataset after cleaning")

    columns: dict[str, np.ndarray] = {}
    for name, values in ds.columns.items():
        kind = ds.kinds[name]
        v = values[keep]
        if kind == "los":
            columns[name] = v.astype(np.int64)
            continue
        if kind == "categorical":
            miss = np.array([x is None for x in v], dtype=bool)
            n_miss = int(miss.sum())
            if n_miss:
                v = v.copy()
                v[miss] = policy.categorical_fill
                report.filled_values[name] = policy.categorical_fill
        else:
            miss = np.isnan(v)
            n_miss = int(miss.sum())
            if n_miss:
                v = v.copy()
                if policy.numeric_fill == "median" and n_miss < len(v):
                    fill = float(np.median(v[~miss]))
                else:
                    fill = 0.0
                v[miss] = fill
                report.filled_values[name] = fill
        report.missing_per_column[name] = n_miss
        columns[name] = v
    out = Dataset(columns, dict(ds.kinds))
    logger.info(
        "cleaned: %d rows dropped, %d cells imputed",
        report.rows_dropped,
        sum(report.missing_per_column.values()),
    )
    return out, report


# --------------------------------------------------------------------------
# profiling
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Correlation:
    a: str
    b: str
    r: float
    degenerate: bool = False


@dataclass
class ProfileReport:
    n_rows: int
    numeric_summary: dict[str, dict[str, float]]
    category_frequencies: dict[str, dict[str, int]]
    correlations: list[Correlation]
    groupby: dict[str, list[tuple[str, float, int]]]
    los_histogram: dict[int, int]

    def correlation_matrix(self) -> tuple[list[str], np.ndarray]:
        names: list[str] = []
        for c in self.correlations:
            for n in (c.a, c.b):
                if n not in names:
                    names.append(n)
        idx = {n: i for i, n in enumerate(names)}
        m = np.eye(len(names))
        for c in self.correlations:
            m[idx[c.a], idx[c.b]] = m[idx[c.b], idx[c.a]] = c.r
        return names, m

    def to_dict(self) -> dict:
        return {
            "n_rows": self.n_rows,
            "numeric_summary": self.numeric_summary,
            "category_frequencies": self.category_frequencies,
            "correlations": [
                {"a": c.a, "b": c.b, "r": c.r, "degenerate": c.degenerate}
                for c in self.correlations
            ],
            "groupby": {
                k: [{"category": c, "mean_los": m, "count": n} for c, m, n in rows]
                for k, rows in self.groupby.items()
            },
            "los_histogram": {str(k): v for k, v in self.los_histogram.items()},
        }


def pearson(x: np.ndarray, y: np.ndarray) -> tuple[float, bool]:
    """Pearson r, or ``(0.0, True)`` when either input has zero variance."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        return 0.0, True
    r = float(dx @ dy) / np.sqrt(sxx * syy)
    return float(np.clip(r, -1.0, 1.0)), False


def profile(ds: Dataset) -> ProfileReport:
    if ds.n_rows == 0:
        raise DatasetError("cannot profile an empty dataset")
    los_name = ds.los_name
    los = ds[los_name].astype(float)
    if np.isnan(los).any():
        raise DatasetError("profile expects a cleaned dataset (missing length of stay)")

    numeric = [n for n in ds.names if ds.kinds[n] in ("numeric", "currency", "los")]
    summary = {}
    for n in numeric:
        v = ds[n].astype(float)
        summary[n] = {
            "min": float(np.nanmin(v)),
            "max": float(np.nanmax(v)),
            "mean": float(np.nanmean(v)),
            "std": float(np.nanstd(v)),
        }

    corrs = []
    for i, a in enumerate(numeric):
        for b in numeric[i + 1 :]:
            r, degenerate = pearson(ds[a], ds[b])
            corrs.append(Correlation(a, b, r, degenerate))

    freqs: dict[str, dict[str, int]] = {}
    groups: dict[str, list[tuple[str, float, int]]] = {}
    for n in ds.names:
        if ds.kinds[n] != "categorical":
            continue
        labels = np.array(["" if x is None else str(x) for x in ds[n]], dtype=object)
        cats, inverse, counts = np.unique(labels, return_inverse=True, return_counts=True)
        sums = np.bincount(inverse, weights=los, minlength=len(cats))
        freqs[n] = {str(c): int(k) for c, k in zip(cats, counts)}
        groups[n] = [
            (str(c), float(s / k), int(k)) for c, s, k in zip(cats, sums, counts)
        ]

    days, counts = np.unique(los.astype(np.int64), return_counts=True)
    hist = {int(d): int(c) for d, c in zip(days, counts)}
    return ProfileReport(ds.n_rows, summary, freqs, corrs, groups, hist)


def _slug(name: str) -> str:
    return re.sub(r"[^0-9a-zA-Z]+", "_", name).strip("_").lower()


def write_profile(report: ProfileReport, out_dir: str | Path) -> dict[str, Path]:
    """Serialize a profile as ``profile.json`` plus one CSV per plot-ready table."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: dict[str, Path] = {}

    p = out_dir / "profile.json"
    p.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    written["profile"] = p

    p = out_dir / "correlation.csv"
    with p.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["column_a", "column_b", "r", "degenerate"])
        for c in report.correlations:
            w.writerow([c.a, c.b, repr(c.r), int(c.degenerate)])
    written["correlation"] = p

    p = out_dir / "los_histogram.csv"
    with p.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["length_of_stay", "count"])
        for d, c in sorted(report.los_histogram.items()):
            w.writerow([d, c])
    written["los_histogram"] = p

    for col, rows in report.groupby.items():
        p = out_dir / f"groupby_{_slug(col)}.csv"
        with p.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([col, "mean_los", "count"])
            for cat, mean, count in sorted(rows, key=lambda r: -r[1]):
                w.writerow([cat, repr(mean), count])
        written[f"groupby:{col}"] = p
    return written
