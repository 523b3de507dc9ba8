"""Run configuration: a flat JSON object whose keys mirror the CLI long options.

Example ``run.json``::

    {"dataset": "data/cohort", "output": "out", "max_depth": 10, "seed": 7,
     "channels": ["AF7", "AF8"]}

Unknown keys are rejected.  Command-line flags override file values, and the
effective configuration (minus ``threads``, which never affects results) is
echoed into every report.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .errors import UsageError
from .evaluation import SplitSpec
from .features import FRAME_LEN, HOP, STATS
from .forest import ForestParams
from .ingest import ChannelId, SignalKind

DATASET_ENV = "MUSICID_DATASET"


@dataclass
class RunConfig:
    dataset: str | None = None
    features: str | None = None
    output: str = "musicid-out"
    frame_len: int = FRAME_LEN
    hop: int = HOP
    n_trees: int = 100
    max_depth: int = 10
    mtry: int | None = None
    min_samples_split: int = 2
    bootstrap: bool = True
    seed: int = 0
    train_fraction: float = 0.8
    gap: int = 0
    cv_folds: int = 10
    threshold: float = 0.5
    channels: list[str] | None = None
    signals: list[str] | None = None
    stats: list[str] | None = None
    condition: str = "SameSong"
    threads: int = 1
    formats: list[str] | None = None

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.frame_len < 2 or not 1 <= self.hop <= self.frame_len:
            raise UsageError("need frame_len >= 2 and 1 <= hop <= frame_len")
        if self.cv_folds < 2:
            raise UsageError("cv_folds must be >= 2")
        if self.threads < 1:
            raise UsageError("threads must be >= 1")
        if not 0 < self.threshold < 1:
            raise UsageError("threshold must lie in (0, 1)")
        for c in self.channels or []:
            ChannelId(c)
        for s in self.signals or []:
            SignalKind(s)
        for s in self.stats or []:
            if s not in STATS:
                raise UsageError(f"unknown stat {s!r}")
        if self.condition not in ("SameSong", "FavoriteSong", "Combined"):
            raise UsageError("condition must be SameSong, FavoriteSong or Combined")
        for f in self.formats or []:
            if f not in ("json", "csv", "txt", "png"):
                raise UsageError(f"unknown report format {f!r}")
        self.forest_params()
        self.split_spec()

    def forest_params(self) -> ForestParams:
        return ForestParams(self.n_trees, self.max_depth, self.mtry, self.min_samples_split, self.bootstrap, self.seed)

    def split_spec(self) -> SplitSpec:
        return SplitSpec(self.train_fraction, "Tail", self.gap)

    def wants(self, fmt: str) -> bool:
        return self.formats is None or fmt in self.formats

    def to_dict(self) -> dict:
        return asdict(self)

    def echo(self) -> dict:
        d = self.to_dict()
        d.pop("threads")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise UsageError(f"unknown config keys: {unknown}")
        try:
            return cls(**d)
        except (TypeError, ValueError) as exc:
            raise UsageError(f"invalid config: {exc}") from None

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def loads(cls, text: str) -> "RunConfig":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise UsageError(f"config is not valid JSON: {exc}") from None


def resolve(config_path: str | None, overrides: dict) -> RunConfig:
    """File values, then the dataset environment variable, then non-``None`` flag overrides."""
    base = RunConfig.loads(Path(config_path).read_text(encoding="utf-8")).to_dict() if config_path else {}
    if os.environ.get(DATASET_ENV):
        base["dataset"] = os.environ[DATASET_ENV]
    base.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig.from_dict(base)
