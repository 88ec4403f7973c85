import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from losml.learners import TreeParams, fit_tree
from losml.evaluation import evaluate
from losml.tuning import (
    DEFAULT_SPACES,
    Choice,
    IntUniform,
    LogUniform,
    SearchError,
    SearchSpace,
    random_search,
    sampler_from_spec,
    trial_seed,
    write_trials_csv,
)


@pytest.fixture(scope="module")
def data():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(300, 4))
    y = ((X[:, 0] + 0.5 * X[:, 1] ** 2 + 0.3 * rng.normal(size=300)) > 0.4).astype(int)
    y[X[:, 2] > 1.2] = 2
    return X[:200], y[:200], X[200:], y[200:]


def test_samplers_from_spec():
    assert sampler_from_spec([1, 2]) == Choice((1, 2))
    assert sampler_from_spec({"type": "int", "low": 1, "high": 3}) == IntUniform(1, 3)
    assert sampler_from_spec({"type": "loguniform", "low": 0.1, "high": 1}) == LogUniform(0.1, 1.0)
    with pytest.raises(SearchError):
        sampler_from_spec({"type": "normal"})
    with pytest.raises(SearchError):
        IntUniform(3, 1)
    with pytest.raises(SearchError):
        LogUniform(0.0, 1.0)
    with pytest.raises(SearchError):
        SearchSpace({})


@pytest.mark.parametrize("family", sorted(DEFAULT_SPACES))
def test_default_space_roundtrip(family):
    space = SearchSpace.from_dict(DEFAULT_SPACES[family])
    assert SearchSpace.from_dict(space.to_dict()) == space


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_samples_stay_in_range(seed):
    rng = np.random.default_rng(seed)
    for spec in DEFAULT_SPACES.values():
        space = SearchSpace.from_dict(spec)
        cfg = space.sample(rng)
        assert set(cfg) == set(spec)
        for k, v in cfg.items():
            assert space.samplers[k].contains(v)


def test_trial_seeds_distinct():
    seeds = [trial_seed(42, i) for i in range(1000)]
    assert len(set(seeds)) == 1000
    assert trial_seed(42, 3) == trial_seed(42, 3) != trial_seed(43, 3)


def test_single_trial(data):
    space = SearchSpace({"max_depth": IntUniform(1, 20)})
    r = random_search(space, 1, 0, "accuracy", "tree", *data)
    assert len(r.trials) == 1 and r.best_index == 0
    assert r.best_params == r.trials[0].params


def test_search_is_deterministic(data):
    space = SearchSpace.from_dict(DEFAULT_SPACES["tree"])
    a = random_search(space, 6, 9, "f1", "tree", *data)
    b = random_search(space, 6, 9, "f1", "tree", *data)
    assert a.to_dict() == b.to_dict()
    c = random_search(space, 6, 10, "f1", "tree", *data)
    assert [t.params for t in a.trials] != [t.params for t in c.trials]


def test_best_is_argmax_with_earliest_tie(data):
    space = SearchSpace({"max_depth": IntUniform(1, 20)})
    r = random_search(space, 5, 1, "accuracy", "tree", *data)
    scores = [t.objective for t in r.trials]
    assert r.best_index == int(np.argmax(scores))
    assert r.best_objective == max(scores)

    # each trial's score matches an independent fit with the sampled depth
    Xtr, ytr, Xva, yva = data
    for t in r.trials:
        m = fit_tree(Xtr, ytr, TreeParams(max_depth=t.params["max_depth"], seed=t.seed % 2**31), n_classes=3)
        assert evaluate(yva, m.predict(Xva), 3)[1].accuracy == t.objective


def test_failed_trial_recorded(data):
    # min_samples_leaf=0 is rejected by the tree's parameter validation
    space = SearchSpace({"min_samples_leaf": Choice((0, 1))})
    r = random_search(space, 8, 4, "accuracy", "tree", *data)
    failed = [t for t in r.trials if t.failed]
    assert failed and all(t.objective is None for t in failed)
    assert not r.trials[r.best_index].failed


def test_all_trials_failing(data):
    space = SearchSpace({"min_samples_leaf": Choice((0,))})
    with pytest.raises(SearchError, match="all trials failed"):
        random_search(space, 3, 0, "accuracy", "tree", *data)


def test_argument_checks(data):
    space = SearchSpace({"max_depth": IntUniform(1, 3)})
    with pytest.raises(SearchError):
        random_search(space, 0, 0, "accuracy", "tree", *data)
    with pytest.raises(SearchError):
        random_search(space, 1, 0, "auc", "tree", *data)


def test_trials_csv(tmp_path, data):
    space = SearchSpace({"max_depth": IntUniform(1, 4)})
    r = random_search(space, 3, 0, "mcc", "tree", *data)
    lines = write_trials_csv(r, tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "index,seed,params,objective,error"
    assert len(lines) == 4
