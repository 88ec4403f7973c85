import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from losml.pipeline import PipelineConfig, run_pipeline
from losml.synth import SynthError, SynthSpec, synthesize_dataset


def test_same_seed_identical():
    a = synthesize_dataset(SynthSpec(500, seed=8, missing_rate=0.05))
    b = synthesize_dataset(SynthSpec(500, seed=8, missing_rate=0.05))
    assert a.names == b.names
    for n in a.names:
        x, y = a[n], b[n]
        if x.dtype == object:
            assert list(x) == list(y)
        else:
            assert np.array_equal(x, y, equal_nan=True)


def test_different_seed_differs():
    a = synthesize_dataset(SynthSpec(500, seed=1))
    b = synthesize_dataset(SynthSpec(500, seed=2))
    assert not np.array_equal(a["Length of Stay"], b["Length of Stay"])


def test_mean_los_increases_with_severity():
    ds = synthesize_dataset(SynthSpec(5000, seed=0, severity_effect=0.8))
    los, sev = ds["Length of Stay"], ds["APR Severity of Illness Code"]
    means = [los[sev == s].mean() for s in (1, 2, 3, 4)]
    assert all(a < b for a, b in zip(means, means[1:]))


def test_los_right_skewed_and_in_range():
    los = synthesize_dataset(SynthSpec(5000, seed=0))["Length of Stay"]
    assert los.min() >= 1 and los.max() <= 120
    assert np.all(los == np.round(los))
    assert los.mean() > np.median(los)


@settings(max_examples=20, deadline=None)
@given(st.integers(100, 400), st.integers(0, 10_000))
def test_shape_and_domain(n, seed):
    ds = synthesize_dataset(SynthSpec(n, seed=seed))
    assert ds.n_rows == n
    assert set(np.unique(ds["APR Severity of Illness Code"])) <= {1.0, 2.0, 3.0, 4.0}


def test_missing_rate_plants_gaps():
    ds = synthesize_dataset(SynthSpec(2000, seed=4, missing_rate=0.1))
    assert np.isnan(ds["Length of Stay"]).mean() == pytest.approx(0.1, abs=0.03)
    assert sum(v is None for v in ds["Gender"]) > 0


@pytest.mark.parametrize("kw", [
    {"n_rows": 99}, {"severity_effect": float("inf")}, {"noise": -1.0}, {"missing_rate": 0.6},
])
def test_spec_rejects(kw):
    with pytest.raises(SynthError):
        SynthSpec(**kw)


def test_null_effects_give_baseline_accuracy():
    # a wider base spread populates several bins; labels stay independent of features.
    # Small tables let the boosted trees memorize noise, hence the row count.
    ds = synthesize_dataset(SynthSpec(20_000, seed=21, base_log_los=1.6, noise=0.6).without_effects())
    cfg = PipelineConfig.from_dict({"model.family": "gbm", "model.preset": "paper", "seed": 21})
    counts = np.bincount(np.digitize(ds["Length of Stay"], [5.5, 10.5, 20.5, 30.5, 50.5]))
    assert counts[counts > 0].min() >= 2  # stratification precondition
    art = run_pipeline(cfg, dataset=ds, emit=False)
    y_test = art.labels.labels[art.test_idx]
    baseline = np.bincount(y_test).max() / len(y_test)
    assert abs(art.report.accuracy - baseline) <= 0.03
