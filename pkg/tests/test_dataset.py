import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from losml.dataset import (
    CleanReport,
    ColumnSchema,
    Dataset,
    DatasetError,
    LosParseError,
    clean,
    drop_columns,
    load_csv,
    parse_los,
    pearson,
    profile,
    validate_schema,
    write_csv,
    write_profile,
)


def _csv(path, rows):
    with path.open("w", newline="") as fh:
        csv.writer(fh).writerows(rows)
    return path


def test_load_three_rows(tmp_path):
    p = _csv(tmp_path / "a.csv", [["Age Group", "Length of Stay"], ["0 to 17", "3"], ["18 to 29", "7"], ["70 or Older", "120 +"]])
    schema = [ColumnSchema("Age Group", "categorical"), ColumnSchema("Length of Stay", "los")]
    ds = load_csv(p, schema)
    assert ds.n_rows == 3
    assert ds.names == ["Age Group", "Length of Stay"]
    assert ds["Length of Stay"].tolist() == [3, 7, 120]


def test_currency_cells_are_stripped(tmp_path, tiny_schema):
    raw = ["$1,234.50", "$10.00", "7", "$2,000,000.01", "0.99"]
    rows = [["Age Group", "Total Costs", "Length of Stay"]] + [["0 to 17", c, "2"] for c in raw]
    ds = load_csv(_csv(tmp_path / "c.csv", rows), tiny_schema)
    expected = [float(c.replace("$", "").replace(",", "")) for c in raw]
    assert ds["Total Costs"].tolist() == expected
    assert ds["Total Costs"][0] == 1234.50


def test_missing_los_column(tmp_path, tiny_schema):
    p = _csv(tmp_path / "m.csv", [["Age Group", "Total Costs"], ["0 to 17", "1"]])
    with pytest.raises(DatasetError, match="required column absent"):
        load_csv(p, tiny_schema)


def test_missing_file(tmp_path, tiny_schema):
    with pytest.raises(DatasetError, match="not found"):
        load_csv(tmp_path / "nope.csv", tiny_schema)


def test_bad_required_cell_names_row_and_column(tmp_path, tiny_schema):
    p = _csv(tmp_path / "b.csv", [["Age Group", "Total Costs", "Length of Stay"], ["a", "1", "2"], ["a", "1", "abc"]])
    with pytest.raises(DatasetError, match=r"row 2.*Length of Stay"):
        load_csv(p, tiny_schema)


def test_bad_optional_cell_becomes_missing(tmp_path, tiny_schema):
    p = _csv(tmp_path / "o.csv", [["Age Group", "Total Costs", "Length of Stay"], ["a", "n/a", "2"]])
    ds = load_csv(p, tiny_schema)
    assert np.isnan(ds["Total Costs"][0])


def test_header_mapping(tmp_path, tiny_schema):
    p = _csv(tmp_path / "h.csv", [["age", "cost", "los"], ["0 to 17", "$5", "4"]])
    ds = load_csv(p, tiny_schema, {"age": "Age Group", "cost": "Total Costs", "los": "Length of Stay"})
    assert ds["Total Costs"][0] == 5.0


@pytest.mark.parametrize("raw, days", [("5", 5), ("120 +", 120), ("120+", 120), (" 120  + ", 120), ("1", 1), ("119", 119), ("250", 120)])
def test_parse_los(raw, days):
    assert parse_los(raw) == days


@pytest.mark.parametrize("raw", ["0", "-3", "abc", "", "  ", "1.5"])
def test_parse_los_rejects(raw):
    with pytest.raises(LosParseError):
        parse_los(raw)


def test_parse_los_error_names_value():
    with pytest.raises(LosParseError, match="'0'"):
        parse_los("0")


def _five_columns(n=4):
    cols = {
        "Facility Id": np.arange(n, dtype=float),
        "Gender": np.array(["F", "M"] * (n // 2), dtype=object),
        "Race": np.array(["White"] * n, dtype=object),
        "Total Costs": np.linspace(10, 20, n),
        "Length of Stay": np.arange(1, n + 1).astype(float),
    }
    kinds = {"Facility Id": "numeric", "Gender": "categorical", "Race": "categorical",
             "Total Costs": "currency", "Length of Stay": "los"}
    return Dataset(cols, kinds)


def test_drop_one_column():
    ds = _five_columns()
    out = drop_columns(ds, ["Facility Id"])
    assert len(out.names) == 4 and "Facility Id" not in out.names
    assert out.n_rows == ds.n_rows


def test_drop_nothing_is_identity():
    ds = _five_columns()
    assert drop_columns(ds, []) is ds


def test_drop_absent_name_is_noted():
    ds = _five_columns()
    report = CleanReport()
    out = drop_columns(ds, ["Zip"], report)
    assert out.names == ds.names
    assert report.columns_not_found == ["Zip"]
    assert report.columns_dropped == []


def test_clean_drops_missing_los():
    ds = _five_columns(10)
    los = ds["Length of Stay"].copy()
    los[[2, 7]] = np.nan
    ds = Dataset({**ds.columns, "Length of Stay": los}, ds.kinds)
    out, report = clean(ds)
    assert out.n_rows == 8
    assert report.rows_dropped == 2
    assert out["Length of Stay"].dtype == np.int64


def test_clean_fills_unknown_and_median():
    cols = {
        "Gender": np.array(["F", None, "M", "F"], dtype=object),
        "x": np.array([1.0, 2.0, np.nan, 4.0]),
        "Length of Stay": np.array([1.0, 2.0, 3.0, 4.0]),
    }
    ds = Dataset(cols, {"Gender": "categorical", "x": "numeric", "Length of Stay": "los"})
    out, report = clean(ds)
    assert "Unknown" in out["Gender"].tolist()
    assert out["x"][2] == 2.0
    assert report.missing_per_column == {"Gender": 1, "x": 1}


def test_clean_all_rows_missing_los():
    ds = Dataset({"Length of Stay": np.array([np.nan, np.nan])}, {"Length of Stay": "los"})
    with pytest.raises(DatasetError, match="empty dataset after cleaning"):
        clean(ds)


def test_clean_is_idempotent(small_synth):
    from losml.synth import SynthSpec, synthesize_dataset

    ds = synthesize_dataset(SynthSpec(n_rows=400, seed=9, missing_rate=0.1))
    once, r1 = clean(ds)
    twice, r2 = clean(once)
    assert r2.rows_dropped == 0
    assert once.n_rows + r1.rows_dropped == ds.n_rows
    for n in once.names:
        assert once[n].tolist() == twice[n].tolist()


def test_pearson_examples():
    x = np.array([1.0, 2.0, 3.0, 5.0])
    assert pearson(x, x)[0] == pytest.approx(1.0)
    assert pearson(x, -x)[0] == pytest.approx(-1.0)
    r, deg = pearson(np.array([1.0, 2, 3]), np.array([2.0, 4, 7]))
    # direct formula: cov / (sx sy) with deviations (-1,0,1) and (-7/3,-1/3,8/3)
    dy = np.array([-7 / 3, -1 / 3, 8 / 3])
    assert r == pytest.approx((7 / 3 + 8 / 3) / np.sqrt(2 * (dy @ dy)))
    assert r == pytest.approx(0.99340, abs=1e-5)
    assert not deg


def test_pearson_zero_variance_flags():
    assert pearson(np.ones(4), np.arange(4.0)) == (0.0, True)


def test_profile_invariants(small_synth, tmp_path):
    ds, _ = clean(small_synth)
    rep = profile(ds)
    assert all(-1 <= c.r <= 1 for c in rep.correlations)
    names, m = rep.correlation_matrix()
    assert np.allclose(m, m.T) and np.all(np.diag(m) == 1)
    for rows in rep.groupby.values():
        assert sum(n for _, _, n in rows) == ds.n_rows
    assert sum(rep.los_histogram.values()) == ds.n_rows
    written = write_profile(rep, tmp_path)
    assert (tmp_path / "profile.json").exists()
    assert "groupby:Age Group" in written


def test_profile_flags_constant_column():
    ds = Dataset(
        {"c": np.ones(5), "Length of Stay": np.arange(1, 6)},
        {"c": "numeric", "Length of Stay": "los"},
    )
    rep = profile(ds)
    assert rep.correlations[0].r == 0.0 and rep.correlations[0].degenerate


def test_schema_needs_one_los():
    with pytest.raises(DatasetError):
        validate_schema([ColumnSchema("a", "numeric")])
    with pytest.raises(DatasetError):
        validate_schema([ColumnSchema("a", "los"), ColumnSchema("a", "numeric")])


_cat = st.one_of(st.none(), st.sampled_from(["F", "M", "a,b", 'quote"d', "Unknown"]))
_num = st.one_of(st.just(float("nan")), st.floats(-1e9, 1e9, allow_nan=False))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(_cat, _num, st.integers(1, 120)), min_size=1, max_size=20))
def test_csv_round_trip(tmp_path_factory, rows):
    ds = Dataset(
        {
            "g": np.array([r[0] for r in rows], dtype=object),
            "x": np.array([r[1] for r in rows]),
            "Length of Stay": np.array([float(r[2]) for r in rows]),
        },
        {"g": "categorical", "x": "currency", "Length of Stay": "los"},
    )
    p = write_csv(ds, tmp_path_factory.mktemp("rt") / "d.csv")
    back = load_csv(p, ds.schema())
    assert back["g"].tolist() == ds["g"].tolist()
    np.testing.assert_array_equal(back["x"], ds["x"])
    np.testing.assert_array_equal(back["Length of Stay"], ds["Length of Stay"])
