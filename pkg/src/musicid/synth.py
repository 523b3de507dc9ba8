"""Synthetic cohorts of band-power sessions with tunable user separability.

Every (signal, channel) series of a synthetic user is a stationary Gaussian
AR(1) process::

    x[t] = mu + rho * (x[t-1] - mu) + eps[t],   eps ~ N(0, sigma^2 (1 - rho^2))

so its stationary standard deviation is ``sigma``.  User baselines are
``mu = base + sigma * separation / sqrt(2) * z`` with ``z ~ N(0, 1)`` on the
informative signals, which makes the root-mean-square gap between two users'
baselines ``separation * sigma``.  The favorite-song condition adds
``+-condition_shift * sigma`` to a random subset of each user's series.

Seeds: a profile draws from ``SeedSequence(seed, spawn_key=(0, user_index))``
and a session from ``SeedSequence(seed, spawn_key=(1, user_index,
condition_rank, session_index))``, so generation order never matters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import UsageError
from .ingest import (
    CHANNELS,
    CONDITIONS,
    RECORDING_INTERVAL_S,
    SAMPLES_PER_SESSION,
    SIGNALS,
    Condition,
    Session,
    SignalKind,
)

# sessions per user for the 20-user cohort of the original study
PAPER_SESSIONS: tuple[int, ...] = (5,) * 5 + (4,) + (3,) * 5 + (2,) * 9

BASE_LEVEL = {
    SignalKind.Delta: 1.2,
    SignalKind.Theta: 0.8,
    SignalKind.Alpha: 1.0,
    SignalKind.Beta: 0.6,
    SignalKind.Gamma: 0.3,
    SignalKind.Raw: 0.0,
}
BASE_STD = {
    SignalKind.Delta: 0.1,
    SignalKind.Theta: 0.1,
    SignalKind.Alpha: 0.1,
    SignalKind.Beta: 0.1,
    SignalKind.Gamma: 0.1,
    SignalKind.Raw: 1.0,
}

N_SLOTS = len(SIGNALS) * len(CHANNELS)


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=key)))


@dataclass(frozen=True)
class SubjectProfile:
    """Per-slot AR(1) parameters; arrays are ``(6 signals, 4 channels)``."""

    user_id: str
    mean: np.ndarray
    std: np.ndarray
    rho: np.ndarray
    condition_offset: dict[Condition, np.ndarray]

    def __post_init__(self):
        for name in ("mean", "std", "rho"):
            a = np.asarray(getattr(self, name), dtype=np.float64)
            if a.shape != (len(SIGNALS), len(CHANNELS)):
                raise UsageError(f"profile {name} must have shape (6, 4)")
            object.__setattr__(self, name, a)
        if not (self.std > 0).all():
            raise UsageError("profile std must be positive")
        if not ((self.rho >= 0) & (self.rho < 1)).all():
            raise UsageError("profile rho must lie in [0, 1)")

    def mean_for(self, condition: Condition) -> np.ndarray:
        return self.mean + self.condition_offset.get(Condition(condition), 0.0)


@dataclass(frozen=True)
class CohortSpec:
    n_users: int = 20
    sessions_per_user: tuple[int, ...] = PAPER_SESSIONS
    samples_per_session: int = SAMPLES_PER_SESSION
    separation: float = 3.0
    condition_shift: float = 0.0
    shift_fraction: float = 0.5
    rho: float = 0.9
    informative: tuple[SignalKind, ...] = SIGNALS
    conditions: tuple[Condition, ...] = CONDITIONS
    seed: int = 0
    frame_len: int = 40
    recording_interval_s: float = RECORDING_INTERVAL_S

    def __post_init__(self):
        object.__setattr__(self, "sessions_per_user", tuple(int(k) for k in self.sessions_per_user))
        object.__setattr__(self, "informative", tuple(SignalKind(s) for s in self.informative))
        object.__setattr__(self, "conditions", tuple(Condition(c) for c in self.conditions))
        if self.n_users < 2:
            raise UsageError("a cohort needs at least two users")
        if len(self.sessions_per_user) != self.n_users:
            raise UsageError("sessions_per_user must list one count per user")
        if min(self.sessions_per_user) < 1:
            raise UsageError("every user needs at least one session")
        if self.samples_per_session < self.frame_len:
            raise UsageError("samples_per_session must be at least frame_len")
        if self.separation < 0 or self.condition_shift < 0:
            raise UsageError("separation and condition_shift must be non-negative")
        if not 0 <= self.rho < 1:
            raise UsageError("rho must lie in [0, 1)")
        if not 0 <= self.shift_fraction <= 1:
            raise UsageError("shift_fraction must lie in [0, 1]")

    def user_id(self, user_index: int) -> str:
        width = max(2, len(str(self.n_users)))
        return f"user{user_index + 1:0{width}d}"

    def to_dict(self) -> dict:
        return {
            "n_users": self.n_users,
            "sessions_per_user": list(self.sessions_per_user),
            "samples_per_session": self.samples_per_session,
            "separation": self.separation,
            "condition_shift": self.condition_shift,
            "shift_fraction": self.shift_fraction,
            "rho": self.rho,
            "informative": [s.value for s in self.informative],
            "conditions": [c.value for c in self.conditions],
            "seed": self.seed,
            "frame_len": self.frame_len,
            "recording_interval_s": self.recording_interval_s,
        }


def uniform_cohort(n_users: int, sessions: int = 1, **kw) -> CohortSpec:
    return CohortSpec(n_users=n_users, sessions_per_user=(sessions,) * n_users, **kw)


def make_profile(user_index: int, spec: CohortSpec, rng: np.random.Generator | None = None) -> SubjectProfile:
    """Draw one user's profile; deterministic in ``(spec.seed, user_index)`` unless ``rng`` is given."""
    if rng is None:
        rng = _rng(spec.seed, 0, user_index)
    shape = (len(SIGNALS), len(CHANNELS))
    base = np.array([[BASE_LEVEL[s]] * len(CHANNELS) for s in SIGNALS])
    std = np.array([[BASE_STD[s]] * len(CHANNELS) for s in SIGNALS])
    z = rng.standard_normal(shape)
    informative = np.array([s in spec.informative for s in SIGNALS])[:, None]
    mean = base + np.where(informative, spec.separation / math.sqrt(2.0) * std * z, 0.0)

    # the shifted subset and signs are drawn even when the shift is zero so
    # that cohorts differing only in condition_shift share everything else
    n_shift = int(round(spec.shift_fraction * N_SLOTS))
    chosen = rng.permutation(N_SLOTS)[:n_shift]
    signs = rng.choice([-1.0, 1.0], size=N_SLOTS)
    shift = np.zeros(N_SLOTS)
    shift[chosen] = signs[chosen] * spec.condition_shift
    offsets = {
        Condition.SameSong: np.zeros(shape),
        Condition.FavoriteSong: shift.reshape(shape) * std,
    }
    return SubjectProfile(spec.user_id(user_index), mean, std, np.full(shape, spec.rho), offsets)


def generate_session(
    profile: SubjectProfile,
    condition: Condition | str,
    n_samples: int = SAMPLES_PER_SESSION,
    rng: np.random.Generator | None = None,
    session_index: int = 1,
    recording_interval_s: float = RECORDING_INTERVAL_S,
) -> Session:
    if n_samples < 1:
        raise UsageError("n_samples must be >= 1")
    if rng is None:
        rng = np.random.default_rng()
    condition = Condition(condition)
    mu = profile.mean_for(condition)
    rho, sigma = profile.rho, profile.std
    innov = sigma * np.sqrt(1.0 - rho**2)
    noise = rng.standard_normal((n_samples,) + mu.shape)
    dev = np.empty_like(noise)
    dev[0] = sigma * noise[0]
    for t in range(1, n_samples):
        dev[t] = rho * dev[t - 1] + innov * noise[t]
    timestamps = np.arange(n_samples, dtype=np.float64) * recording_interval_s
    return Session(
        user_id=profile.user_id,
        condition=condition,
        session_index=session_index,
        timestamps=timestamps,
        values=mu + dev,
        recording_interval_s=recording_interval_s,
    )


def generate_cohort(spec: CohortSpec) -> list[Session]:
    """Sessions for every user, condition and session index, ordered by that key."""
    sessions = []
    for u in range(spec.n_users):
        profile = make_profile(u, spec)
        for cond in spec.conditions:
            c = CONDITIONS.index(cond)
            for k in range(1, spec.sessions_per_user[u] + 1):
                sessions.append(
                    generate_session(
                        profile, cond, spec.samples_per_session, _rng(spec.seed, 1, u, c, k), k,
                        spec.recording_interval_s,
                    )
                )
    return sessions
