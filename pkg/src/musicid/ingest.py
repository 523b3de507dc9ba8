"""Session model and canonical CSV ingestion for 4-channel band-power recordings.

A recording holds one row every ``recording_interval_s`` seconds with the
absolute power of five frequency bands plus the raw EEG value for each of the
four headset electrodes (24 readings per row).  The canonical on-disk form is
a CSV file with header::

    TimeStamp,Delta_TP9,Delta_AF7,Delta_AF8,Delta_TP10,Theta_TP9,...,RAW_TP10

Datasets live on disk as ``<root>/<user_id>/<condition>/<session_index>.csv``.
"""

from __future__ import annotations

import csv
import enum
import io
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import DataError, EmptySession, MissingColumn, NonMonotonicTime


class ChannelId(enum.Enum):
    TP9 = "TP9"
    AF7 = "AF7"
    AF8 = "AF8"
    TP10 = "TP10"

    @property
    def rank(self) -> int:
        return CHANNELS.index(self)


class SignalKind(enum.Enum):
    Delta = "Delta"
    Theta = "Theta"
    Alpha = "Alpha"
    Beta = "Beta"
    Gamma = "Gamma"
    Raw = "Raw"

    @property
    def band_hz(self) -> tuple[float, float] | None:
        """Nominal frequency range of a band, ``None`` for the raw signal."""
        return BAND_RANGES_HZ.get(self)

    @property
    def csv_prefix(self) -> str:
        return "RAW" if self is SignalKind.Raw else self.value


class Condition(enum.Enum):
    SameSong = "SameSong"
    FavoriteSong = "FavoriteSong"


CHANNELS: tuple[ChannelId, ...] = tuple(ChannelId)
SIGNALS: tuple[SignalKind, ...] = tuple(SignalKind)
REDUCED_SIGNALS: tuple[SignalKind, ...] = tuple(s for s in SIGNALS if s is not SignalKind.Delta)
CONDITIONS: tuple[Condition, ...] = tuple(Condition)

BAND_RANGES_HZ: dict[SignalKind, tuple[float, float]] = {
    SignalKind.Delta: (0.5, 4.0),
    SignalKind.Theta: (4.0, 7.5),
    SignalKind.Alpha: (7.5, 12.0),
    SignalKind.Beta: (12.0, 30.0),
    SignalKind.Gamma: (30.0, 100.0),
}

RECORDING_INTERVAL_S = 0.5
SAMPLES_PER_SESSION = 300

TIMESTAMP_COLUMN = "TimeStamp"
SIGNAL_COLUMNS: tuple[str, ...] = tuple(
    f"{s.csv_prefix}_{c.value}" for s in SIGNALS for c in CHANNELS
)
CANONICAL_HEADER: tuple[str, ...] = (TIMESTAMP_COLUMN,) + SIGNAL_COLUMNS


def column_name(signal: SignalKind, channel: ChannelId) -> str:
    return f"{signal.csv_prefix}_{channel.value}"


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Session:
    """One recording task.

    ``values`` has shape ``(n_samples, 6, 4)`` indexed by
    ``[sample, signal_rank, channel_rank]`` in the canonical orders of
    :data:`SIGNALS` and :data:`CHANNELS`.  Finiteness is not enforced here so
    that :func:`validate_session` can report on suspect data.
    """

    user_id: str
    condition: Condition
    session_index: int
    timestamps: np.ndarray
    values: np.ndarray
    recording_interval_s: float = RECORDING_INTERVAL_S
    dropped_rows: int = 0
    signals: tuple[SignalKind, ...] = field(default=SIGNALS)

    def __post_init__(self):
        object.__setattr__(self, "condition", Condition(self.condition))
        object.__setattr__(self, "timestamps", _frozen(self.timestamps))
        object.__setattr__(self, "values", _frozen(self.values))
        n = self.timestamps.shape[0]
        if self.timestamps.ndim != 1:
            raise DataError("timestamps must be one-dimensional")
        if self.values.shape != (n, len(self.signals), len(CHANNELS)):
            raise DataError(
                f"values shape {self.values.shape} does not match "
                f"({n}, {len(self.signals)}, {len(CHANNELS)})"
            )
        if self.session_index < 1:
            raise DataError("session_index must be a positive integer")

    @property
    def sample_count(self) -> int:
        return int(self.timestamps.shape[0])

    @property
    def key(self) -> tuple[str, str, int]:
        return (self.user_id, self.condition.value, self.session_index)

    def series(self, signal: SignalKind, channel: ChannelId) -> np.ndarray:
        return self.values[:, self.signals.index(signal), channel.rank]


@dataclass(frozen=True)
class ReducedSession(Session):
    """A :class:`Session` with the Delta band removed (20 readings per sample)."""

    signals: tuple[SignalKind, ...] = field(default=REDUCED_SIGNALS)
    source: Session | None = field(default=None, compare=False, repr=False)


@dataclass
class ValidationReport:
    sample_count: int
    expected_samples: int
    count_mismatch: bool
    non_finite: list[tuple[int, str, str]]
    non_increasing: list[int]
    irregular_intervals: list[int]

    @property
    def ok(self) -> bool:
        return not (
            self.count_mismatch or self.non_finite or self.non_increasing or self.irregular_intervals
        )

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "sample_count": self.sample_count,
            "expected_samples": self.expected_samples,
            "count_mismatch": self.count_mismatch,
            "non_finite": [list(x) for x in self.non_finite],
            "non_increasing": self.non_increasing,
            "irregular_intervals": self.irregular_intervals,
        }


def _parse_float(text: str) -> float | None:
    text = text.strip()
    if not text:
        return None
    try:
        v = float(text)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def parse_session(
    data: bytes | str,
    user_id: str,
    condition: Condition | str,
    session_index: int,
    mapping: Mapping[str, str] | None = None,
    recording_interval_s: float = RECORDING_INTERVAL_S,
) -> Session:
    """Parse CSV text into a :class:`Session`.

    ``mapping`` maps canonical column names (``TimeStamp``, ``Alpha_AF7``, ...)
    to the names used in the file; unmapped columns keep their canonical name.
    Rows with a blank, non-numeric or non-finite required cell are dropped
    whole and counted in ``Session.dropped_rows``.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8-sig")
    mapping = dict(mapping or {})
    reader = csv.reader(io.StringIO(data))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise EmptySession("file has no header row") from None

    positions = []
    for canonical in CANONICAL_HEADER:
        name = mapping.get(canonical, canonical)
        try:
            positions.append(header.index(name))
        except ValueError:
            raise MissingColumn(name) from None

    rows = []
    dropped = 0
    for record in reader:
        if not record or all(not cell.strip() for cell in record):
            continue
        parsed = []
        for pos in positions:
            v = _parse_float(record[pos]) if pos < len(record) else None
            if v is None:
                break
            parsed.append(v)
        if len(parsed) != len(positions):
            dropped += 1
            continue
        rows.append(parsed)

    if not rows:
        raise EmptySession(f"no valid rows ({dropped} dropped)")
    table = np.array(rows, dtype=np.float64)
    timestamps = table[:, 0]
    bad = np.flatnonzero(np.diff(timestamps) <= 0)
    if bad.size:
        i = int(bad[0]) + 1
        raise NonMonotonicTime(
            f"timestamp at valid row {i} ({timestamps[i]!r}) does not exceed "
            f"the previous one ({timestamps[i - 1]!r})"
        )
    values = table[:, 1:].reshape(len(rows), len(SIGNALS), len(CHANNELS))
    return Session(
        user_id=str(user_id),
        condition=Condition(condition),
        session_index=int(session_index),
        timestamps=timestamps,
        values=values,
        recording_interval_s=recording_interval_s,
        dropped_rows=dropped,
    )


def serialize_session(session: Session) -> bytes:
    """Render a full (24-signal) session in the canonical CSV layout.

    Floats are written with ``repr`` so parsing the output is value-exact.
    """
    if session.signals != SIGNALS:
        raise DataError("only full 24-signal sessions have a canonical CSV form")
    out = io.StringIO()
    out.write(",".join(CANONICAL_HEADER) + "\n")
    flat = session.values.reshape(session.sample_count, -1)
    for t, row in zip(session.timestamps.tolist(), flat.tolist()):
        out.write(repr(t) + "," + ",".join(repr(v) for v in row) + "\n")
    return out.getvalue().encode("utf-8")


def drop_delta(session: Session) -> ReducedSession:
    """Remove the four Delta readings, keeping every other value bit-identical."""
    if isinstance(session, ReducedSession) or SignalKind.Delta not in session.signals:
        raise DataError("session has no Delta band to remove")
    keep = [session.signals.index(s) for s in REDUCED_SIGNALS]
    return ReducedSession(
        user_id=session.user_id,
        condition=session.condition,
        session_index=session.session_index,
        timestamps=session.timestamps,
        values=session.values[:, keep, :],
        recording_interval_s=session.recording_interval_s,
        dropped_rows=session.dropped_rows,
        source=session,
    )


def validate_session(
    session: Session, expected_samples: int = SAMPLES_PER_SESSION, interval_tolerance: float = 0.5
) -> ValidationReport:
    """Report count, finiteness and timing problems without modifying anything.

    An interval counts as irregular when it deviates from the nominal
    recording interval by more than ``interval_tolerance`` of that interval.
    """
    n = session.sample_count
    rows, sig, ch = np.nonzero(~np.isfinite(session.values))
    non_finite = [
        (int(r), session.signals[s].value, CHANNELS[c].value) for r, s, c in zip(rows, sig, ch)
    ]
    dt = np.diff(session.timestamps)
    non_increasing = [int(i) + 1 for i in np.flatnonzero(~(dt > 0))]
    nominal = session.recording_interval_s
    irregular = [
        int(i) + 1
        for i in np.flatnonzero(np.abs(dt - nominal) > interval_tolerance * nominal)
        if int(i) + 1 not in non_increasing
    ]
    return ValidationReport(
        sample_count=n,
        expected_samples=expected_samples,
        count_mismatch=n != expected_samples,
        non_finite=non_finite,
        non_increasing=non_increasing,
        irregular_intervals=irregular,
    )


def session_path(root: str | os.PathLike, user_id: str, condition: Condition | str, index: int) -> Path:
    return Path(root) / str(user_id) / Condition(condition).value / f"{int(index)}.csv"


def discover_sessions(root: str | os.PathLike) -> list[tuple[str, Condition, int, Path]]:
    """List ``(user_id, condition, session_index, path)`` under a dataset root, sorted."""
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"dataset root not found: {root}")
    found = []
    for user_dir in root.iterdir():
        if not user_dir.is_dir():
            continue
        for cond in CONDITIONS:
            cond_dir = user_dir / cond.value
            if not cond_dir.is_dir():
                continue
            for f in cond_dir.glob("*.csv"):
                if f.stem.isdigit():
                    found.append((user_dir.name, cond, int(f.stem), f))
    found.sort(key=lambda t: (t[0], CONDITIONS.index(t[1]), t[2]))
    return found


def load_dataset(
    root: str | os.PathLike, mapping: Mapping[str, str] | None = None
) -> list[Session]:
    return [
        parse_session(path.read_bytes(), user, cond, idx, mapping)
        for user, cond, idx, path in discover_sessions(root)
    ]


def write_dataset(root: str | os.PathLike, sessions: Iterable[Session]) -> list[Path]:
    paths = []
    for s in sessions:
        p = session_path(root, s.user_id, s.condition, s.session_index)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_bytes(serialize_session(s))
        paths.append(p)
    return paths
