"""Overlapping framing and per-frame summary statistics.

Each frame of a Delta-free session yields 80 features: mean, max, min and
zero crossing rate for each of the 20 (signal, channel) series.  Column
``((channel_rank * 5) + signal_rank) * 4 + stat_rank`` holds statistic
``stat`` of ``signal`` at ``channel``, named ``"{stat}_{signal}_{channel}"``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DataError, EmptySelection, SeriesTooShort, SessionTooShort, UsageError
from .ingest import (
    CHANNELS,
    CONDITIONS,
    REDUCED_SIGNALS,
    ChannelId,
    Condition,
    ReducedSession,
    Session,
    SignalKind,
    drop_delta,
)

STATS: tuple[str, ...] = ("mean", "max", "min", "zcr")
FRAME_LEN = 40
HOP = 20
PROVENANCE_COLUMNS = ("user_id", "condition", "session", "frame")

FEATURE_NAMES: tuple[str, ...] = tuple(
    f"{stat}_{sig.value}_{ch.value}" for ch in CHANNELS for sig in REDUCED_SIGNALS for stat in STATS
)
N_FEATURES = len(FEATURE_NAMES)


def feature_index(stat: str, signal: SignalKind, channel: ChannelId) -> int:
    return ((channel.rank * len(REDUCED_SIGNALS)) + REDUCED_SIGNALS.index(signal)) * len(STATS) + STATS.index(stat)


def parse_feature_name(name: str) -> tuple[str, SignalKind, ChannelId]:
    stat, sig, ch = name.split("_")
    return stat, SignalKind(sig), ChannelId(ch)


@dataclass(frozen=True)
class Frame:
    frame_index: int
    start: int
    length: int
    values: np.ndarray  # (length, 5 signals, 4 channels)


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    user_id: str
    condition: Condition
    session_index: int
    frame_index: int
    names: tuple[str, ...] = FEATURE_NAMES

    def __getitem__(self, name: str) -> float:
        return float(self.values[self.names.index(name)])


def _check_framing(n: int, frame_len: int, hop: int) -> None:
    if frame_len < 2:
        raise UsageError("frame_len must be at least 2")
    if not 1 <= hop <= frame_len:
        raise UsageError("hop must satisfy 1 <= hop <= frame_len")
    if n < frame_len:
        raise SessionTooShort(f"session has {n} samples, frame_len is {frame_len}")


def frame_count(n: int, frame_len: int = FRAME_LEN, hop: int = HOP) -> int:
    _check_framing(n, frame_len, hop)
    return (n - frame_len) // hop + 1


def make_frames(session: ReducedSession, frame_len: int = FRAME_LEN, hop: int = HOP) -> list[Frame]:
    """Cut a session into windows at offsets 0, hop, 2*hop, ...; the partial tail is discarded."""
    n = session.sample_count
    count = frame_count(n, frame_len, hop)
    return [
        Frame(i, i * hop, frame_len, session.values[i * hop : i * hop + frame_len])
        for i in range(count)
    ]


def zcr(series) -> float:
    """Fraction of adjacent pairs whose sign differs, with sign(0) = +1."""
    x = np.asarray(series, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] < 2:
        raise SeriesTooShort("zero crossing rate needs at least two values")
    neg = x < 0
    return float(np.count_nonzero(neg[1:] != neg[:-1]) / (x.shape[0] - 1))


def _window_stats(windows: np.ndarray) -> np.ndarray:
    """Statistics over axis -3 of ``(..., L, 5, 4)``; returns ``(..., 80)``."""
    L = windows.shape[-3]
    if L < 2:
        raise SeriesTooShort("zero crossing rate needs at least two values")
    neg = windows < 0
    crossings = np.count_nonzero(neg[..., 1:, :, :] != neg[..., :-1, :, :], axis=-3)
    lo = windows.min(axis=-3)
    # mean taken relative to the minimum so constant series give the constant exactly
    mean = lo + (windows - lo[..., None, :, :]).mean(axis=-3)
    stats = np.stack(
        [
            mean,
            windows.max(axis=-3),
            lo,
            crossings / (L - 1),
        ],
        axis=-1,
    )  # (..., 5 signals, 4 channels, 4 stats)
    stats = np.swapaxes(stats, -3, -2)  # (..., channel, signal, stat)
    return stats.reshape(stats.shape[:-3] + (N_FEATURES,))


def frame_stats(frame: Frame, session: Session | None = None) -> FeatureVector:
    values = _window_stats(np.asarray(frame.values, dtype=np.float64))
    if session is None:
        return FeatureVector(values, "", Condition.SameSong, 1, frame.frame_index)
    return FeatureVector(values, session.user_id, session.condition, session.session_index, frame.frame_index)


@dataclass(frozen=True)
class FeatureMatrix:
    """Feature rows with per-row provenance.

    ``X`` is ``(n_rows, n_features)``; ``users``, ``conditions``, ``sessions``
    and ``frames`` are aligned 1-D arrays.
    """

    X: np.ndarray
    users: np.ndarray
    conditions: np.ndarray
    sessions: np.ndarray
    frames: np.ndarray
    feature_names: tuple[str, ...] = FEATURE_NAMES

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim != 2:
            X = X.reshape(-1, len(self.feature_names))
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "users", np.asarray(self.users, dtype=str).reshape(-1))
        object.__setattr__(self, "conditions", np.asarray(self.conditions, dtype=str).reshape(-1))
        object.__setattr__(self, "sessions", np.asarray(self.sessions, dtype=np.int64).reshape(-1))
        object.__setattr__(self, "frames", np.asarray(self.frames, dtype=np.int64).reshape(-1))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        n = X.shape[0]
        if X.shape[1] != len(self.feature_names):
            raise DataError(f"{X.shape[1]} columns but {len(self.feature_names)} feature names")
        for name in ("users", "conditions", "sessions", "frames"):
            if getattr(self, name).shape[0] != n:
                raise DataError(f"{name} not aligned with rows")

    def __len__(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def labels(self) -> np.ndarray:
        return self.users

    @property
    def label_set(self) -> tuple[str, ...]:
        return tuple(sorted(set(self.users.tolist())))

    def row(self, i: int) -> FeatureVector:
        return FeatureVector(
            self.X[i],
            str(self.users[i]),
            Condition(str(self.conditions[i])),
            int(self.sessions[i]),
            int(self.frames[i]),
            self.feature_names,
        )

    def __iter__(self):
        return (self.row(i) for i in range(len(self)))

    def take(self, idx) -> "FeatureMatrix":
        idx = np.asarray(idx)
        if idx.dtype != bool:
            idx = idx.astype(np.int64)
        return FeatureMatrix(
            self.X[idx], self.users[idx], self.conditions[idx], self.sessions[idx], self.frames[idx],
            self.feature_names,
        )

    def where_condition(self, condition: Condition | str) -> "FeatureMatrix":
        return self.take(np.flatnonzero(self.conditions == Condition(condition).value))

    def to_csv(self) -> bytes:
        out = io.StringIO()
        out.write(",".join(self.feature_names + PROVENANCE_COLUMNS) + "\n")
        for x, u, c, s, f in zip(
            self.X.tolist(), self.users.tolist(), self.conditions.tolist(),
            self.sessions.tolist(), self.frames.tolist(),
        ):
            out.write(",".join(repr(v) for v in x) + f",{u},{c},{s},{f}\n")
        return out.getvalue().encode("utf-8")

    @classmethod
    def from_csv(cls, data: bytes | str) -> "FeatureMatrix":
        if isinstance(data, bytes):
            data = data.decode("utf-8")
        reader = csv.reader(io.StringIO(data))
        header = next(reader)
        names = tuple(header[: -len(PROVENANCE_COLUMNS)])
        if tuple(header[-len(PROVENANCE_COLUMNS):]) != PROVENANCE_COLUMNS:
            raise DataError("feature CSV lacks provenance columns")
        X, users, conds, sessions, frames = [], [], [], [], []
        for rec in reader:
            if not rec:
                continue
            X.append([float(v) for v in rec[: len(names)]])
            u, c, s, f = rec[len(names):]
            users.append(u)
            conds.append(Condition(c).value)
            sessions.append(int(s))
            frames.append(int(f))
        return cls(np.array(X, dtype=np.float64).reshape(-1, len(names)), users, conds, sessions, frames, names)


def concat(matrices: Sequence[FeatureMatrix]) -> FeatureMatrix:
    names = matrices[0].feature_names
    if any(m.feature_names != names for m in matrices):
        raise DataError("cannot concatenate matrices with different feature columns")
    return FeatureMatrix(
        np.concatenate([m.X for m in matrices]).reshape(-1, len(names)),
        np.concatenate([m.users for m in matrices]),
        np.concatenate([m.conditions for m in matrices]),
        np.concatenate([m.sessions for m in matrices]),
        np.concatenate([m.frames for m in matrices]),
        names,
    )


def featurize_session(session: ReducedSession, frame_len: int = FRAME_LEN, hop: int = HOP) -> FeatureMatrix:
    if SignalKind.Delta in session.signals:
        raise DataError("featurize a Delta-free session (see drop_delta)")
    count = frame_count(session.sample_count, frame_len, hop)
    windows = sliding_window_view(session.values, frame_len, axis=0)[::hop][:count]
    # sliding_window_view appends the window axis last: (count, 5, 4, L)
    windows = np.moveaxis(windows, -1, 1)
    X = _window_stats(windows)
    return FeatureMatrix(
        X,
        [session.user_id] * count,
        [session.condition.value] * count,
        [session.session_index] * count,
        np.arange(count),
    )


def _session_order(s: Session):
    return (s.user_id, CONDITIONS.index(s.condition), s.session_index)


def featurize_dataset(sessions: Iterable[Session], frame_len: int = FRAME_LEN, hop: int = HOP) -> FeatureMatrix:
    """Featurize many sessions; rows ordered by (user, condition, session, frame)."""
    parts = []
    for s in sorted(sessions, key=_session_order):
        if SignalKind.Delta in s.signals:
            s = drop_delta(s)
        parts.append(featurize_session(s, frame_len, hop))
    if not parts:
        raise DataError("no sessions to featurize")
    return concat(parts)


def _as_set(items, kind) -> set | None:
    if items is None:
        return None
    out = {kind(i) for i in items}
    if not out:
        raise EmptySelection("selection sets must be non-empty")
    return out


def select_features(
    matrix: FeatureMatrix,
    channels: Iterable[ChannelId | str] | None = None,
    signals: Iterable[SignalKind | str] | None = None,
    stats: Iterable[str] | None = None,
) -> FeatureMatrix:
    """Keep columns whose channel, signal and stat are all selected (``None`` = all)."""
    chs = _as_set(channels, ChannelId)
    sigs = _as_set(signals, SignalKind)
    sts = _as_set(stats, str)
    if sts is not None and not sts <= set(STATS):
        raise UsageError(f"unknown stats: {sorted(sts - set(STATS))}")
    keep = []
    for i, name in enumerate(matrix.feature_names):
        stat, sig, ch = parse_feature_name(name)
        if (chs is None or ch in chs) and (sigs is None or sig in sigs) and (sts is None or stat in sts):
            keep.append(i)
    if not keep:
        raise EmptySelection("selection retains no feature columns")
    return FeatureMatrix(
        matrix.X[:, keep], matrix.users, matrix.conditions, matrix.sessions, matrix.frames,
        tuple(matrix.feature_names[i] for i in keep),
    )
