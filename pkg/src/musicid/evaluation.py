"""Experiment protocols: per-session splits, k-fold CV, scoring, ablations, cross-condition."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import MissingCondition, TooFewFrames, TooFewRows, UnseenLabel, UsageError
from .features import FeatureMatrix, select_features
from .forest import (
    Forest,
    ForestParams,
    OvrModel,
    derive_seed,
    feature_importance,
    train_forest,
    train_ovr,
)
from .ingest import CONDITIONS, ChannelId, Condition, SignalKind

IDENTIFICATION = "identification"
VERIFICATION = "verification"
TASKS = (IDENTIFICATION, VERIFICATION)
COMBINED = "Combined"

ELECTRODE_SUBSETS: tuple[tuple[str, ...], ...] = (
    ("AF7",), ("AF8",), ("TP9",), ("TP10",), ("AF7", "AF8"), ("TP9", "TP10"),
)
BAND_SUBSETS: tuple[tuple[str, ...], ...] = (
    ("Alpha",), ("Beta",), ("Gamma",), ("Theta",),
    ("Alpha", "Beta"), ("Beta", "Gamma"), ("Gamma", "Theta"),
)


@dataclass(frozen=True)
class SplitSpec:
    """Per-session split: the last ``1 - train_fraction`` of frames form the test block.

    ``gap`` drops that many train frames next to the test block so that no
    train frame shares samples with a test frame.
    """

    train_fraction: float = 0.8
    test_block: str = "Tail"
    gap: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise UsageError("train_fraction must lie in (0, 1)")
        if self.test_block != "Tail":
            raise UsageError("only the 'Tail' test block is supported")
        if self.gap < 0:
            raise UsageError("gap must be non-negative")

    def to_dict(self) -> dict:
        return {"train_fraction": self.train_fraction, "test_block": self.test_block, "gap": self.gap}


def split_session_frames(n_frames: int, spec: SplitSpec = SplitSpec()) -> tuple[list[int], list[int]]:
    if n_frames < 2:
        raise TooFewFrames(f"cannot split {n_frames} frame(s)")
    n_test = math.floor(n_frames * (1.0 - spec.train_fraction) + 0.5)
    n_test = min(max(n_test, 1), n_frames - 1)
    n_train = n_frames - n_test
    if n_train - spec.gap < 1:
        raise TooFewFrames(f"gap={spec.gap} leaves no training frames out of {n_frames}")
    return list(range(n_train - spec.gap)), list(range(n_train, n_frames))


def split_matrix(matrix: FeatureMatrix, spec: SplitSpec = SplitSpec()) -> tuple[FeatureMatrix, FeatureMatrix]:
    """Apply :func:`split_session_frames` within every (user, condition, session) group."""
    groups: dict[tuple[str, str, int], list[int]] = {}
    for i, key in enumerate(zip(matrix.users.tolist(), matrix.conditions.tolist(), matrix.sessions.tolist())):
        groups.setdefault(key, []).append(i)
    train, test = [], []
    for key in sorted(groups):
        rows = sorted(groups[key], key=lambda i: matrix.frames[i])
        tr, te = split_session_frames(len(rows), spec)
        train.extend(rows[i] for i in tr)
        test.extend(rows[i] for i in te)
    return matrix.take(sorted(train)), matrix.take(sorted(test))


def kfold(matrix: FeatureMatrix, k: int = 10, seed: int = 0) -> list[tuple[np.ndarray, np.ndarray]]:
    """User-stratified k-fold partitions of row indices.

    Each user's rows are shuffled, users are laid end to end in sorted order
    and row ``p`` of that sequence lands in fold ``p mod k``.  Fold sizes and
    per-user fold counts therefore differ by at most one.
    """
    n = len(matrix)
    if k < 2:
        raise UsageError("k must be at least 2")
    if n < k:
        raise TooFewRows(f"{n} rows cannot fill {k} folds")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(2,))))
    order = []
    for user in matrix.label_set:
        rows = np.flatnonzero(matrix.users == user)
        order.extend(rows[rng.permutation(rows.shape[0])].tolist())
    fold_of = np.empty(n, dtype=np.int64)
    fold_of[np.asarray(order, dtype=np.int64)] = np.arange(n) % k
    return [(np.flatnonzero(fold_of != f), np.flatnonzero(fold_of == f)) for f in range(k)]


@dataclass
class EvalReport:
    task: str
    accuracy: float
    labels: tuple[str, ...]
    confusion: np.ndarray
    per_user_accuracy: dict[str, float]
    config: dict = field(default_factory=dict)
    importances: dict[str, float] | None = None
    extra: dict = field(default_factory=dict)

    @property
    def n_test(self) -> int:
        return int(self.confusion.sum())

    def to_dict(self) -> dict:
        d = {
            "task": self.task,
            "accuracy": self.accuracy,
            "n_test": self.n_test,
            "labels": list(self.labels),
            "confusion": self.confusion.tolist(),
            "per_user_accuracy": dict(self.per_user_accuracy),
            "config": self.config,
        }
        if self.importances is not None:
            d["importances"] = dict(self.importances)
        if self.extra:
            d["extra"] = self.extra
        return d


def _check_labels(train: FeatureMatrix, test: FeatureMatrix) -> None:
    unseen = sorted(set(test.users.tolist()) - set(train.users.tolist()))
    if unseen:
        raise UnseenLabel(f"test users absent from training data: {unseen}")


def score_identification(forest: Forest, test: FeatureMatrix, config: dict | None = None) -> EvalReport:
    labels = forest.label_set
    predicted, _ = forest.predict_many(test.X)
    index = {u: i for i, u in enumerate(labels)}
    truth = np.array([index[u] for u in test.users.tolist()], dtype=np.int64)
    pred = np.array([index[u] for u in predicted.tolist()], dtype=np.int64)
    confusion = np.zeros((len(labels), len(labels)), dtype=np.int64)
    np.add.at(confusion, (truth, pred), 1)
    per_user = {}
    for i, u in enumerate(labels):
        row_total = confusion[i].sum()
        if row_total:
            per_user[u] = float(confusion[i, i] / row_total)
    accuracy = float(np.trace(confusion) / confusion.sum()) if len(test) else float("nan")
    return EvalReport(IDENTIFICATION, accuracy, labels, confusion, per_user, dict(config or {}))


def evaluate_identification(train: FeatureMatrix, test: FeatureMatrix, params: ForestParams = ForestParams(),
                            threads: int = 1, config: dict | None = None,
                            importances: bool = False) -> EvalReport:
    _check_labels(train, test)
    forest = train_forest(train, params, threads)
    report = score_identification(forest, test, {"params": params.to_dict(), **(config or {})})
    if importances:
        report.importances = dict(zip(forest.feature_names, feature_importance(forest).tolist()))
    return report


def verification_scores(model: OvrModel, test: FeatureMatrix) -> np.ndarray:
    """``(n_test, n_users)`` positive vote fractions for every (frame, claimed user) pair."""
    return np.stack([model.scores(test.X, u) for u in model.users], axis=1)


def score_verification(model: OvrModel, test: FeatureMatrix, config: dict | None = None,
                       scores: np.ndarray | None = None) -> EvalReport:
    """Score every (test frame, enrolled user) claim; genuine iff the frame's user is the claimed one."""
    users = model.users
    if scores is None:
        scores = verification_scores(model, test)
    accept = scores >= model.threshold
    genuine = test.users[:, None] == np.asarray(users)[None, :]
    correct = accept == genuine
    confusion = np.array(
        [
            [np.count_nonzero(accept & genuine), np.count_nonzero(~accept & genuine)],
            [np.count_nonzero(accept & ~genuine), np.count_nonzero(~accept & ~genuine)],
        ],
        dtype=np.int64,
    )
    per_user, gar, irr = {}, {}, {}
    for j, u in enumerate(users):
        per_user[u] = float(correct[:, j].mean()) if len(test) else float("nan")
        g = genuine[:, j]
        if g.any():
            gar[u] = float(accept[g, j].mean())
        if (~g).any():
            irr[u] = float((~accept[~g, j]).mean())
    accuracy = float(correct.mean()) if correct.size else float("nan")
    extra = {
        "threshold": model.threshold,
        "genuine_accept_rate": gar,
        "impostor_reject_rate": irr,
        "mean_genuine_accept_rate": float(np.mean(list(gar.values()))) if gar else float("nan"),
        "mean_impostor_reject_rate": float(np.mean(list(irr.values()))) if irr else float("nan"),
    }
    return EvalReport(VERIFICATION, accuracy, ("genuine", "impostor"), confusion, per_user,
                      dict(config or {}), extra=extra)


def evaluate_verification(train: FeatureMatrix, test: FeatureMatrix, params: ForestParams = ForestParams(),
                          threshold: float = 0.5, threads: int = 1, config: dict | None = None) -> EvalReport:
    _check_labels(train, test)
    model = train_ovr(train, params, threshold, threads)
    return score_verification(model, test, {"params": params.to_dict(), **(config or {})})


def threshold_sweep(model: OvrModel, test: FeatureMatrix, thresholds: Iterable[float]) -> list[EvalReport]:
    scores = verification_scores(model, test)
    return [score_verification(model.with_threshold(t), test, {"threshold": t}, scores) for t in thresholds]


def evaluate(task: str, train: FeatureMatrix, test: FeatureMatrix, params: ForestParams, threads: int = 1,
             threshold: float = 0.5, config: dict | None = None) -> EvalReport:
    if task == IDENTIFICATION:
        return evaluate_identification(train, test, params, threads, config)
    if task == VERIFICATION:
        return evaluate_verification(train, test, params, threshold, threads, config)
    raise UsageError(f"unknown task {task!r}")


def cross_validate(matrix: FeatureMatrix, params: ForestParams = ForestParams(), k: int = 10, seed: int = 0,
                   task: str = IDENTIFICATION, threads: int = 1, threshold: float = 0.5) -> dict:
    """k-fold accuracy of ``task`` on ``matrix``; each fold trains with a derived seed."""
    folds = []
    for f, (tr, va) in enumerate(kfold(matrix, k, seed)):
        fold_params = ForestParams(**{**params.to_dict(), "seed": derive_seed(params.seed, 3, f)})
        report = evaluate(task, matrix.take(tr), matrix.take(va), fold_params, threads, threshold)
        folds.append(report.accuracy)
    return {"task": task, "k": k, "seed": seed, "fold_accuracy": folds, "mean_accuracy": float(np.mean(folds))}


def _subset_label(subset: Sequence[str]) -> str:
    return "+".join(subset)


def ablate(matrix: FeatureMatrix, axis: str, subsets: Sequence[Sequence[str]] | None = None,
           params: ForestParams = ForestParams(), split: SplitSpec = SplitSpec(),
           conditions: Sequence[Condition | str] | None = None, tasks: Sequence[str] = TASKS,
           include_all: bool = True, threads: int = 1, threshold: float = 0.5) -> list[EvalReport]:
    """Identification/verification accuracy for feature subsets along one axis.

    ``axis`` is ``"electrode"`` (subsets of channel names) or ``"band"``
    (subsets of signal names).  With ``include_all`` an unablated ``"All"``
    row comes first.  Reports are ordered by condition, subset, task.
    """
    axis = axis.lower()
    if axis not in ("electrode", "band"):
        raise UsageError("axis must be 'electrode' or 'band'")
    if subsets is None:
        subsets = ELECTRODE_SUBSETS if axis == "electrode" else BAND_SUBSETS
    subsets = [tuple(s) for s in subsets]
    for s in subsets:  # validate names before any training
        if axis == "electrode":
            [ChannelId(x) for x in s]
        else:
            [SignalKind(x) for x in s]
    if conditions is None:
        conditions = [c for c in CONDITIONS if (matrix.conditions == c.value).any()]
    rows: list[tuple[str, tuple[str, ...] | None]] = ([("All", None)] if include_all else []) + [
        (_subset_label(s), s) for s in subsets
    ]
    reports = []
    for cond in conditions:
        cond = Condition(cond)
        data = matrix.where_condition(cond)
        if not len(data):
            raise MissingCondition(f"no data for condition {cond.value}")
        train, test = split_matrix(data, split)
        for label, subset in rows:
            if subset is None:
                tr, te = train, test
            elif axis == "electrode":
                tr, te = select_features(train, channels=subset), select_features(test, channels=subset)
            else:
                tr, te = select_features(train, signals=subset), select_features(test, signals=subset)
            for task in tasks:
                config = {
                    "axis": axis, "subset": label, "condition": cond.value,
                    "split": split.to_dict(), "n_features": tr.n_features,
                }
                reports.append(evaluate(task, tr, te, params, threads, threshold, config))
    return reports


def _condition_data(matrix: FeatureMatrix, cond: str) -> FeatureMatrix:
    if cond == COMBINED:
        return matrix
    return matrix.where_condition(cond)


def _check_conditions(matrix: FeatureMatrix, conds: Iterable[str]) -> None:
    needed = set()
    for c in conds:
        needed |= {x.value for x in CONDITIONS} if c == COMBINED else {Condition(c).value}
    for user in matrix.label_set:
        have = set(matrix.conditions[matrix.users == user].tolist())
        missing = needed - have
        if missing:
            raise MissingCondition(f"user {user} lacks condition(s) {sorted(missing)}")


def cross_condition(matrix: FeatureMatrix, train_cond: str, test_cond: str,
                    params: ForestParams = ForestParams(), task: str = IDENTIFICATION,
                    split: SplitSpec = SplitSpec(), threads: int = 1, threshold: float = 0.5) -> EvalReport:
    """Train on the train split of ``train_cond``, test on the test split of ``test_cond``.

    Either side may be ``"Combined"`` (the union of both conditions).
    """
    if train_cond != COMBINED:
        train_cond = Condition(train_cond).value
    if test_cond != COMBINED:
        test_cond = Condition(test_cond).value
    _check_conditions(matrix, (train_cond, test_cond))
    train, _ = split_matrix(_condition_data(matrix, train_cond), split)
    _, test = split_matrix(_condition_data(matrix, test_cond), split)
    config = {"train_condition": train_cond, "test_condition": test_cond, "split": split.to_dict()}
    return evaluate(task, train, test, params, threads, threshold, config)


def cross_condition_table(matrix: FeatureMatrix, params: ForestParams = ForestParams(),
                          tasks: Sequence[str] = TASKS, split: SplitSpec = SplitSpec(),
                          include_combined: bool = True, threads: int = 1,
                          threshold: float = 0.5) -> list[EvalReport]:
    """All train/test condition cells, plus combined training tested on each condition."""
    conds = [c.value for c in CONDITIONS]
    train_sides = conds + ([COMBINED] if include_combined else [])
    reports = []
    for task in tasks:
        for tr in train_sides:
            tests = conds + ([COMBINED] if tr == COMBINED else [])
            for te in tests:
                reports.append(cross_condition(matrix, tr, te, params, task, split, threads, threshold))
    return reports


def depth_sweep(matrix: FeatureMatrix, depths: Sequence[int] = (5, 10, 15), params: ForestParams = ForestParams(),
                split: SplitSpec = SplitSpec(), tasks: Sequence[str] = TASKS,
                conditions: Sequence[Condition | str] | None = None, threads: int = 1,
                threshold: float = 0.5) -> list[EvalReport]:
    if conditions is None:
        conditions = [c for c in CONDITIONS if (matrix.conditions == c.value).any()]
    reports = []
    for cond in conditions:
        cond = Condition(cond)
        train, test = split_matrix(matrix.where_condition(cond), split)
        for depth in depths:
            p = ForestParams(**{**params.to_dict(), "max_depth": int(depth)})
            for task in tasks:
                config = {"condition": cond.value, "max_depth": int(depth), "split": split.to_dict()}
                reports.append(evaluate(task, train, test, p, threads, threshold, config))
    return reports
