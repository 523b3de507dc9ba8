"""Random forest of CART trees grown with gini impurity.

Trees are stored as flat node arrays (``feature == -1`` marks a leaf) which
keeps prediction vectorized and makes the JSON model format a direct dump of
the in-memory representation.

Randomness: every tree owns a numpy ``Generator(PCG64(SeedSequence(seed,
spawn_key=(0, tree_index))))``.  It draws the bootstrap sample first, then a
feature permutation at every node that is considered for splitting.  One-vs-
rest models give each user the forest seed ``derive_seed(seed, 1, user_rank)``.
Tree results therefore never depend on training order or thread count.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyCounts,
    InsufficientData,
    ModelFormatError,
    SingleClass,
    UnknownUser,
    UsageError,
)
from .features import FeatureMatrix

MODEL_FORMAT = "musicid-model"
MODEL_VERSION = 1
OVR_LABELS = ("negative", "positive")
_MIN_DECREASE = 1e-12


def derive_seed(seed: int, *keys: int) -> int:
    """Mix ``seed`` with integer ``keys`` into an independent 64-bit seed."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, np.uint64)[0])


def _tree_rng(seed: int, tree_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(0, tree_index))))


def gini_impurity(class_counts) -> float:
    counts = np.asarray(class_counts, dtype=np.float64)
    total = counts.sum()
    if total < 1:
        raise EmptyCounts("gini impurity of an empty node")
    p = counts / total
    return float(1.0 - np.dot(p, p))


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_depth: int = 10
    mtry: int | None = None  # None: floor(sqrt(n_features))
    min_samples_split: int = 2
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise UsageError("n_trees must be >= 1")
        if self.max_depth < 1:
            raise UsageError("max_depth must be >= 1")
        if self.mtry is not None and self.mtry < 1:
            raise UsageError("mtry must be >= 1")
        if self.min_samples_split < 2:
            raise UsageError("min_samples_split must be >= 2")
        if not 0 <= int(self.seed) < 2**64:
            raise UsageError("seed must be a 64-bit unsigned integer")

    def resolved_mtry(self, n_features: int) -> int:
        m = self.mtry if self.mtry is not None else max(1, math.isqrt(n_features))
        if m > n_features:
            raise UsageError(f"mtry={m} exceeds feature count {n_features}")
        return m

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Leaf:
    class_counts: tuple[int, ...]


@dataclass(frozen=True)
class Internal:
    feature_index: int
    threshold: float
    left: "Leaf | Internal"
    right: "Leaf | Internal"


@dataclass(eq=False)
class Tree:
    """Flat node arrays; node 0 is the root, children follow in preorder."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    n_samples: np.ndarray
    impurity: np.ndarray
    value: np.ndarray  # (n_nodes, n_classes) training counts

    def __post_init__(self):
        self.leaf_class = np.argmax(self.value, axis=1)

    @property
    def n_nodes(self) -> int:
        return int(self.feature.shape[0])

    @property
    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                depths[self.left[i]] = depths[self.right[i]] = depths[i] + 1
        return int(depths.max())

    def node(self, i: int = 0) -> Leaf | Internal:
        if self.feature[i] < 0:
            return Leaf(tuple(int(c) for c in self.value[i]))
        return Internal(
            int(self.feature[i]), float(self.threshold[i]),
            self.node(int(self.left[i])), self.node(int(self.right[i])),
        )

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row of ``X``."""
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        while True:
            f = self.feature[node]
            active = f >= 0
            if not active.any():
                return node
            r, n = rows[active], node[active]
            go_left = X[r, f[active]] <= self.threshold[n]
            node[active] = np.where(go_left, self.left[n], self.right[n])

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "n_samples": self.n_samples.tolist(),
            "impurity": self.impurity.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Tree":
        return cls(
            np.asarray(d["feature"], dtype=np.int64),
            np.asarray(d["threshold"], dtype=np.float64),
            np.asarray(d["left"], dtype=np.int64),
            np.asarray(d["right"], dtype=np.int64),
            np.asarray(d["n_samples"], dtype=np.int64),
            np.asarray(d["impurity"], dtype=np.float64),
            np.asarray(d["value"], dtype=np.int64).reshape(len(d["feature"]), -1),
        )

    def structurally_equal(self, other: "Tree") -> bool:
        return all(
            np.array_equal(getattr(self, k), getattr(other, k))
            for k in ("feature", "threshold", "left", "right", "n_samples", "impurity", "value")
        )


def _split_threshold(lo: float, hi: float) -> float:
    t = (lo + hi) / 2.0
    # rounding can push the midpoint onto the upper value
    return lo if t >= hi else t


def _best_split_codes(X: np.ndarray, y: np.ndarray, n_classes: int, features: np.ndarray):
    """Best split among ``features`` (ascending) for integer labels ``y``.

    Returns ``(feature, threshold, decrease)`` or ``None``.
    """
    n = X.shape[0]
    if n < 2:
        return None
    Xs = X[:, features]
    order = np.argsort(Xs, axis=0, kind="stable")
    xs = np.take_along_axis(Xs, order, axis=0)
    ys = y[order]  # (n, m)
    m = len(features)
    onehot = np.zeros((n, m, n_classes), dtype=np.int64)
    onehot[np.arange(n)[:, None], np.arange(m)[None, :], ys] = 1
    left = np.cumsum(onehot, axis=0)[:-1]  # (n-1, m, K) counts left of each cut
    total = left[-1] + onehot[-1]
    right = total[None] - left
    nl = np.arange(1, n, dtype=np.float64)[:, None]
    score = (left * left).sum(axis=-1) / nl + (right * right).sum(axis=-1) / (n - nl)
    score[~(xs[1:] > xs[:-1])] = -np.inf
    # feature-major flattening: argmax picks lowest feature, then lowest threshold
    flat = np.argmax(score.T)
    j, pos = divmod(int(flat), n - 1)
    best = score[pos, j]
    if not np.isfinite(best):
        return None
    parent_sq = float((total[0] * total[0]).sum())
    decrease = best / n - parent_sq / (n * n)
    if decrease <= _MIN_DECREASE:
        return None
    return int(features[j]), _split_threshold(float(xs[pos, j]), float(xs[pos + 1, j])), float(decrease)


def best_split(rows, labels, candidate_features: Sequence[int] | None = None):
    """Gini-optimal split of ``rows`` over ``candidate_features``.

    Thresholds are midpoints between consecutive distinct values; rows with
    ``x <= threshold`` go left.  Returns ``(feature_index, threshold,
    impurity_decrease)`` or ``None`` when no split lowers the impurity.
    """
    X = np.asarray(rows, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    _, y = np.unique(np.asarray(labels), return_inverse=True)
    k = int(y.max()) + 1 if y.size else 0
    if candidate_features is None:
        candidate_features = range(X.shape[1])
    feats = np.array(sorted(set(int(f) for f in candidate_features)), dtype=np.int64)
    if X.shape[0] < 2 or k < 2 or feats.size == 0:
        return None
    return _best_split_codes(X, y.reshape(-1), k, feats)


def _grow_tree(X: np.ndarray, y: np.ndarray, n_classes: int, params: ForestParams, mtry: int,
               tree_index: int) -> Tree:
    rng = _tree_rng(params.seed, tree_index)
    n, d = X.shape
    sample = rng.integers(0, n, size=n) if params.bootstrap else np.arange(n)

    feature, threshold, left, right, n_samples, impurity, value = [], [], [], [], [], [], []

    def build(idx: np.ndarray, depth: int) -> int:
        node = len(feature)
        counts = np.bincount(y[idx], minlength=n_classes)
        imp = gini_impurity(counts)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        n_samples.append(idx.shape[0])
        impurity.append(imp)
        value.append(counts)
        if depth >= params.max_depth or idx.shape[0] < params.min_samples_split or imp <= 0.0:
            return node
        perm = rng.permutation(d)
        Xn, yn = X[idx], y[idx]
        split = _best_split_codes(Xn, yn, n_classes, np.sort(perm[:mtry]))
        if split is None and mtry < d:
            split = _best_split_codes(Xn, yn, n_classes, np.sort(perm[mtry:]))
        if split is None:
            return node
        f, t, _ = split
        goes_left = Xn[:, f] <= t
        feature[node] = f
        threshold[node] = t
        left[node] = build(idx[goes_left], depth + 1)
        right[node] = build(idx[~goes_left], depth + 1)
        return node

    build(sample, 0)
    return Tree(
        np.array(feature, dtype=np.int64),
        np.array(threshold, dtype=np.float64),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(n_samples, dtype=np.int64),
        np.array(impurity, dtype=np.float64),
        np.array(value, dtype=np.int64).reshape(-1, n_classes),
    )


@dataclass
class Forest:
    trees: list[Tree]
    label_set: tuple[str, ...]
    params: ForestParams
    feature_names: tuple[str, ...]
    metadata: dict = field(default_factory=dict)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def votes(self, X: np.ndarray) -> np.ndarray:
        """Per-row vote counts, shape ``(n_rows, n_labels)``."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise DimensionMismatch(f"model expects {self.n_features} features, got {X.shape[1]}")
        votes = np.zeros((X.shape[0], len(self.label_set)), dtype=np.int64)
        rows = np.arange(X.shape[0])
        for tree in self.trees:
            np.add.at(votes, (rows, tree.leaf_class[tree.apply(X)]), 1)
        return votes

    def predict_many(self, X) -> tuple[np.ndarray, np.ndarray]:
        votes = self.votes(X)
        fractions = votes / votes.sum(axis=1, keepdims=True)
        labels = np.asarray(self.label_set)[np.argmax(votes, axis=1)]
        return labels, fractions

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "label_set": list(self.label_set),
            "feature_names": list(self.feature_names),
            "metadata": dict(self.metadata),
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Forest":
        return cls(
            [Tree.from_dict(t) for t in d["trees"]],
            tuple(d["label_set"]),
            ForestParams(**d["params"]),
            tuple(d["feature_names"]),
            dict(d.get("metadata", {})),
        )


def _fit(X: np.ndarray, y: np.ndarray, label_set: tuple[str, ...], params: ForestParams,
         feature_names: Sequence[str], threads: int = 1) -> Forest:
    mtry = params.resolved_mtry(X.shape[1])

    def grow(t: int) -> Tree:
        return _grow_tree(X, y, len(label_set), params, mtry, t)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trees = list(pool.map(grow, range(params.n_trees)))
    else:
        trees = [grow(t) for t in range(params.n_trees)]
    return Forest(trees, tuple(label_set), params, tuple(feature_names))


def _check_trainable(matrix: FeatureMatrix, params: ForestParams) -> tuple[str, ...]:
    labels = matrix.label_set
    if len(matrix) < max(2, params.min_samples_split):
        raise InsufficientData(f"{len(matrix)} rows is too few to train on")
    if len(labels) < 2:
        raise SingleClass("training data holds a single user")
    return labels


def train_forest(matrix: FeatureMatrix, params: ForestParams = ForestParams(), threads: int = 1) -> Forest:
    """Multi-class forest over the users in ``matrix``; deterministic in ``params.seed``."""
    labels = _check_trainable(matrix, params)
    y = np.searchsorted(np.asarray(labels), matrix.users)
    return _fit(matrix.X, y, labels, params, matrix.feature_names, threads)


def predict(forest: Forest, x) -> tuple[str, dict[str, float]]:
    """Plurality vote over trees; ties go to the lexicographically smallest label."""
    x = np.asarray(getattr(x, "values", x), dtype=np.float64)
    if x.ndim != 1:
        raise DimensionMismatch("predict takes a single feature vector")
    labels, fractions = forest.predict_many(x[None, :])
    return str(labels[0]), dict(zip(forest.label_set, fractions[0].tolist()))


def feature_importance(forest: Forest) -> np.ndarray:
    """Mean decrease in gini impurity, weighted by node sample fraction, normalized to sum 1."""
    total = np.zeros(forest.n_features, dtype=np.float64)
    for tree in forest.trees:
        internal = np.flatnonzero(tree.feature >= 0)
        if internal.size == 0:
            continue
        l, r = tree.left[internal], tree.right[internal]
        n = tree.n_samples[internal].astype(np.float64)
        child = (tree.n_samples[l] * tree.impurity[l] + tree.n_samples[r] * tree.impurity[r]) / n
        weighted = n / tree.n_samples[0] * (tree.impurity[internal] - child)
        np.add.at(total, tree.feature[internal], weighted)
    total /= len(forest.trees)
    s = total.sum()
    return total / s if s > 0 else total


@dataclass
class OvrModel:
    models: dict[str, Forest]
    threshold: float = 0.5
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 < self.threshold < 1.0:
            raise UsageError("verification threshold must lie in (0, 1)")

    @property
    def users(self) -> tuple[str, ...]:
        return tuple(sorted(self.models))

    @property
    def feature_names(self) -> tuple[str, ...]:
        return next(iter(self.models.values())).feature_names

    @property
    def params(self) -> ForestParams:
        return next(iter(self.models.values())).params

    def scores(self, X, user: str) -> np.ndarray:
        """Positive vote fraction of ``user``'s forest for every row of ``X``."""
        if user not in self.models:
            raise UnknownUser(f"user {user!r} is not enrolled")
        forest = self.models[user]
        votes = forest.votes(X)
        return votes[:, 1] / votes.sum(axis=1)

    def with_threshold(self, threshold: float) -> "OvrModel":
        return OvrModel(self.models, threshold, dict(self.metadata))

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "metadata": dict(self.metadata),
            "models": {u: self.models[u].to_dict() for u in self.users},
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "OvrModel":
        return cls(
            {u: Forest.from_dict(m) for u, m in d["models"].items()},
            float(d["threshold"]),
            dict(d.get("metadata", {})),
        )


def train_ovr(matrix: FeatureMatrix, params: ForestParams = ForestParams(), threshold: float = 0.5,
              threads: int = 1) -> OvrModel:
    """One binary forest per user (positive = that user), no class rebalancing."""
    users = _check_trainable(matrix, params)
    models = {}
    for rank, user in enumerate(users):
        y = (matrix.users == user).astype(np.int64)
        user_params = replace(params, seed=derive_seed(params.seed, 1, rank))
        models[user] = _fit(matrix.X, y, OVR_LABELS, user_params, matrix.feature_names, threads)
    return OvrModel(models, threshold)


def verify(model: OvrModel, x, claimed_user: str) -> tuple[bool, float]:
    x = np.asarray(getattr(x, "values", x), dtype=np.float64)
    score = float(model.scores(x[None, :], claimed_user)[0])
    return score >= model.threshold, score


def model_to_json(model: Forest | OvrModel) -> str:
    body = {"format": MODEL_FORMAT, "version": MODEL_VERSION}
    if isinstance(model, OvrModel):
        body["kind"] = "ovr"
    else:
        body["kind"] = "forest"
    body.update(model.to_dict())
    return json.dumps(body, sort_keys=True, separators=(",", ":")) + "\n"


def model_from_json(text: str | bytes) -> Forest | OvrModel:
    try:
        body = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"model file is not valid JSON: {exc}") from None
    if body.get("format") != MODEL_FORMAT:
        raise ModelFormatError("not a musicid model file")
    if body.get("version") != MODEL_VERSION:
        raise ModelFormatError(f"unsupported model version {body.get('version')!r}")
    if body.get("kind") == "ovr":
        return OvrModel.from_dict(body)
    if body.get("kind") == "forest":
        return Forest.from_dict(body)
    raise ModelFormatError(f"unknown model kind {body.get('kind')!r}")


def save_model(path: str | os.PathLike, model: Forest | OvrModel) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(model_to_json(model))


def load_model(path: str | os.PathLike) -> Forest | OvrModel:
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_json(fh.read())
