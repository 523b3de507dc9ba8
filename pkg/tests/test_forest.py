import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from musicid.errors import EmptyCounts, ModelFormatError, SingleClass, UnknownUser, UsageError
from musicid.evaluation import split_matrix
from musicid.features import FeatureMatrix
from musicid.forest import (
    ForestParams,
    Internal,
    Leaf,
    OvrModel,
    _fit,
    best_split,
    feature_importance,
    gini_impurity,
    load_model,
    model_from_json,
    model_to_json,
    predict,
    save_model,
    train_forest,
    train_ovr,
    verify,
)

from oracles import best_split_loop, gini_loop

FAST = ForestParams(n_trees=15, max_depth=10, seed=0)


def blobs(n_per=30, d=4, gap=10.0, seed=0, classes=("a", "b")):
    rng = np.random.default_rng(seed)
    X = np.concatenate([rng.normal(k * gap, 1.0, (n_per, d)) for k in range(len(classes))])
    users = np.repeat(classes, n_per)
    names = tuple(f"f{i}" for i in range(d))
    return FeatureMatrix(X, users, ["SameSong"] * len(users), [1] * len(users), np.arange(len(users)), names)


@pytest.mark.parametrize("counts,expected", [([10, 0], 0.0), ([5, 5], 0.5), ([1, 1, 1, 1], 0.75)])
def test_gini_examples(counts, expected):
    assert gini_impurity(counts) == expected


def test_gini_empty():
    with pytest.raises(EmptyCounts):
        gini_impurity([0, 0])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 50), min_size=1, max_size=8).filter(lambda c: sum(c) > 0))
def test_gini_bounds(counts):
    g = gini_impurity(counts)
    k = len(counts)
    assert -1e-15 <= g <= 1 - 1 / k + 1e-12
    assert (abs(g) < 1e-15) == (sum(1 for c in counts if c) == 1)
    labels = [i for i, c in enumerate(counts) for _ in range(c)]
    assert g == pytest.approx(gini_loop(labels), abs=1e-12)


def test_best_split_hand_example():
    assert best_split([[1], [2], [9], [10]], ["A", "A", "B", "B"]) == (0, 5.5, 0.5)


def test_best_split_identical_rows():
    assert best_split([[3, 1]] * 4, ["A", "B", "A", "B"]) is None


def test_best_split_picks_informative_feature():
    rows = [[5, 1], [5, 2], [5, 9], [5, 10]]
    f, thr, dec = best_split(rows, ["A", "A", "B", "B"])
    assert (f, thr) == (1, 5.5)
    rows = [[7, 1], [1, 2], [3, 9], [4, 10]]
    assert best_split(rows, ["A", "A", "B", "B"])[:2] == (1, 5.5)


def test_best_split_ties_go_to_lowest_feature():
    rows = [[1, 1], [2, 2], [9, 9], [10, 10]]
    assert best_split(rows, ["A", "A", "B", "B"])[:2] == (0, 5.5)


@settings(max_examples=150, deadline=None)
@given(st.integers(2, 12).flatmap(lambda n: st.tuples(
    st.lists(st.lists(st.integers(0, 6), min_size=3, max_size=3), min_size=n, max_size=n),
    st.lists(st.sampled_from("ABC"), min_size=n, max_size=n),
)))
def test_best_split_matches_exhaustive(data):
    rows, labels = data
    got = best_split(rows, labels)
    ref = best_split_loop(rows, labels)
    if ref is None:
        assert got is None
        return
    f, thr, dec = got
    assert dec == pytest.approx(ref[2], abs=1e-12)
    assert (f, thr) == ref[:2]
    # a chosen split always lowers weighted impurity
    assert dec > 0


def test_forest_is_deterministic():
    m = blobs(gap=2.0)
    a, b = train_forest(m, FAST), train_forest(m, FAST)
    assert all(x.structurally_equal(y) for x, y in zip(a.trees, b.trees))
    assert model_to_json(a) == model_to_json(b)
    assert np.array_equal(feature_importance(a), feature_importance(b))
    assert model_to_json(train_forest(m, FAST, threads=3)) == model_to_json(a)


def test_different_seed_changes_trees():
    m = blobs(gap=1.0)
    a = train_forest(m, FAST)
    b = train_forest(m, ForestParams(n_trees=15, seed=1))
    assert model_to_json(a) != model_to_json(b)


def test_separable_training_accuracy():
    m = blobs(gap=8.0, classes=("a", "b", "c"))
    f = train_forest(m, FAST)
    labels, fractions = f.predict_many(m.X)
    assert np.array_equal(labels, m.users)
    assert np.allclose(fractions.sum(axis=1), 1.0)


@pytest.mark.parametrize("depth", [1, 2, 3, 10])
def test_depth_bound_and_tree_shape(depth):
    m = blobs(gap=0.5, classes=("a", "b", "c"))
    f = train_forest(m, ForestParams(n_trees=5, max_depth=depth))
    for t in f.trees:
        assert t.depth <= depth
        assert np.all(t.feature < m.n_features)
        internal = t.feature >= 0
        assert np.all(t.left[internal] > 0) and np.all(t.right[internal] > 0)
        assert np.all(t.value[~internal].sum(axis=1) > 0)

        def walk(node, d):
            assert d <= depth
            if isinstance(node, Internal):
                walk(node.left, d + 1)
                walk(node.right, d + 1)
            else:
                assert isinstance(node, Leaf) and sum(node.class_counts) > 0

        walk(t.node(0), 0)


def test_single_class_forest():
    X = np.random.default_rng(0).normal(size=(20, 3))
    f = _fit(X, np.zeros(20, dtype=np.int64), ("only",), FAST, ("a", "b", "c"))
    label, fractions = predict(f, X[0])
    assert label == "only" and fractions == {"only": 1.0}
    # row order changes bootstrap draws but not the answer
    g = _fit(X[::-1].copy(), np.zeros(20, dtype=np.int64), ("only",), FAST, ("a", "b", "c"))
    assert np.all(g.predict_many(X)[0] == "only")


def test_training_needs_two_users():
    m = blobs()
    with pytest.raises(SingleClass):
        train_forest(m.take(np.flatnonzero(m.users == "a")), FAST)


def test_vote_tie_goes_to_smallest_label():
    X = np.array([[0.0], [1.0]])
    f = _fit(X, np.array([1, 0]), ("x", "y"), ForestParams(n_trees=1, max_depth=1, bootstrap=False), ("f",))
    g = _fit(X, np.array([0, 1]), ("x", "y"), ForestParams(n_trees=1, max_depth=1, bootstrap=False), ("f",))
    f.trees.append(g.trees[0])
    label, fractions = predict(f, np.array([0.0]))
    assert fractions == {"x": 0.5, "y": 0.5}
    assert label == "x"


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 1000), st.sampled_from(["exp", "cube", "affine"]))
def test_monotone_transform_keeps_predictions(seed, kind):
    m = blobs(n_per=15, d=3, gap=1.5, seed=seed)
    fn = {"exp": np.exp, "cube": lambda v: v**3 + v, "affine": lambda v: 3.0 * v - 7.0}[kind]
    X2 = m.X.copy()
    X2[:, 1] = fn(X2[:, 1])
    m2 = FeatureMatrix(X2, m.users, m.conditions, m.sessions, m.frames, m.feature_names)
    # every tree sees every row, so each tree partitions its own training rows identically
    p = ForestParams(n_trees=5, seed=seed, bootstrap=False)
    a, b = train_forest(m, p), train_forest(m2, p)
    assert np.array_equal(a.predict_many(m.X)[0], b.predict_many(X2)[0])
    for s, t in zip(a.trees, b.trees):
        assert np.array_equal(s.feature, t.feature)
        assert np.array_equal(s.apply(m.X), t.apply(X2))


def test_importance_single_informative_feature():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(120, 6))
    y = np.where(X[:, 4] > 0, "p", "q")
    X[:, 4] += np.where(y == "p", 2.0, -2.0)
    m = FeatureMatrix(X, y, ["SameSong"] * 120, [1] * 120, np.arange(120), tuple(f"f{i}" for i in range(6)))
    imp = feature_importance(train_forest(m, FAST))
    assert imp.sum() == pytest.approx(1.0, abs=1e-12)
    assert int(np.argmax(imp)) == 4
    assert np.all(imp >= 0)


def test_ovr_models_and_verify(small_matrix):
    train, test = split_matrix(small_matrix.where_condition("SameSong"))
    ovr = train_ovr(train, FAST)
    assert ovr.users == train.label_set
    assert len(ovr.models) == 5
    for u, f in ovr.models.items():
        assert f.label_set == ("negative", "positive")
    genuine = test.take(np.flatnonzero(test.users == "user01"))
    accepted, score = verify(ovr, genuine.X[0], "user01")
    assert accepted and 0.5 <= score <= 1.0
    impostor, _ = verify(ovr, genuine.X[0], "user03")
    assert not impostor
    with pytest.raises(UnknownUser):
        verify(ovr, genuine.X[0], "nobody")


def test_ovr_threshold_validated():
    with pytest.raises(UsageError):
        OvrModel({}, threshold=1.0 + 1e-9)
    with pytest.raises(UsageError):
        OvrModel({}, threshold=0.0)


def test_params_validation():
    for bad in (dict(n_trees=0), dict(max_depth=0), dict(mtry=0), dict(min_samples_split=1)):
        with pytest.raises(UsageError):
            ForestParams(**bad)
    with pytest.raises(UsageError):
        train_forest(blobs(d=4), ForestParams(n_trees=2, mtry=5))


def test_model_json_roundtrip(tmp_path, small_matrix):
    f = train_forest(small_matrix, ForestParams(n_trees=5))
    path = tmp_path / "m.json"
    save_model(path, f)
    g = load_model(path)
    assert model_to_json(g) == model_to_json(f)
    assert np.array_equal(g.predict_many(small_matrix.X)[0], f.predict_many(small_matrix.X)[0])
    assert json.loads(path.read_text())["format"] == "musicid-model"

    o = train_ovr(small_matrix, ForestParams(n_trees=3))
    o2 = model_from_json(model_to_json(o))
    assert isinstance(o2, OvrModel)
    assert model_to_json(o2) == model_to_json(o)


def test_model_json_rejects_garbage():
    with pytest.raises(ModelFormatError):
        model_from_json('{"format": "something-else"}')
    with pytest.raises(ModelFormatError):
        model_from_json("not json")
