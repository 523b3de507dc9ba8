"""Report serialization and the consolidated result tables.

All writers are deterministic: JSON keys are sorted, floats use ``repr`` and
NaN becomes ``null``, so identical inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .ingest import CONDITIONS
from .evaluation import BAND_SUBSETS, ELECTRODE_SUBSETS, IDENTIFICATION, TASKS, VERIFICATION, EvalReport

ABSENT = "absent"

# column order of the summary table: favorite song first, as in the study's summary
SUMMARY_COLUMNS = [
    ("FavoriteSong", IDENTIFICATION),
    ("FavoriteSong", VERIFICATION),
    ("SameSong", IDENTIFICATION),
    ("SameSong", VERIFICATION),
]


def _clean(obj):
    if isinstance(obj, float):
        return None if math.isnan(obj) else obj
    if isinstance(obj, (np.floating,)):
        return _clean(float(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=True) + "\n"


def write_json(path: str | os.PathLike, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj), encoding="utf-8")
    return path


def read_json(path: str | os.PathLike):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _cell(v) -> str:
    if v is None:
        return ABSENT
    if isinstance(v, float):
        return repr(v)
    return str(v)


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(v) for v in r])
    return out.getvalue()


def write_csv(path: str | os.PathLike, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(csv_text(header, rows), encoding="utf-8")
    return path


def _pct(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ABSENT
    if isinstance(v, (int, float)):
        return f"{100.0 * v:.2f}%"
    return str(v)


def text_table(header: Sequence[str], rows: Sequence[Sequence], percent: bool = True) -> str:
    """Aligned plain-text table; numeric cells rendered as percentages when ``percent``."""
    body = [[c if isinstance(c, str) else (_pct(c) if percent else _cell(c)) for c in r] for r in rows]
    widths = [max(len(str(h)), *(len(r[i]) for r in body)) if body else len(str(h)) for i, h in enumerate(header)]
    lines = ["  ".join(str(h).ljust(w) for h, w in zip(header, widths))]
    lines.append("  ".join("-" * w for w in widths))
    for r in body:
        lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)))
    return "\n".join(lines) + "\n"


def confusion_csv(report: EvalReport) -> str:
    header = ["true\\predicted"] + list(report.labels if report.task == IDENTIFICATION else ("accept", "reject"))
    return csv_text(header, ([lab] + row for lab, row in zip(report.labels, report.confusion.tolist())))


def experiment_payload(experiment: str, config: dict, reports: Sequence[EvalReport], **extra) -> dict:
    return {"experiment": experiment, "config": config, "reports": [r.to_dict() for r in reports], **extra}


# ---- consolidated tables -------------------------------------------------

def _lookup(reports: Sequence[dict], **match) -> float | None:
    for r in reports:
        cfg = r.get("config", {})
        if all(cfg.get(k, r.get(k)) == v for k, v in match.items()):
            return r.get("accuracy")
    return None


def summary_table(baseline: Sequence[dict] | None, electrode: Sequence[dict] | None,
                  band: Sequence[dict] | None) -> tuple[list[str], list[list]]:
    """Rows: all data, electrode block, band block; missing inputs stay ``None``."""
    header = ["block", "scenario"] + [f"{c}/{t}" for c, t in SUMMARY_COLUMNS]
    rows = []

    def row(block, label, source, subset):
        vals = [
            _lookup(source, subset=subset, condition=c, task=t) if source else None for c, t in SUMMARY_COLUMNS
        ]
        rows.append([block, label] + vals)

    base = baseline or electrode or band
    row("all", "All data", base, "All")
    for s in ELECTRODE_SUBSETS:
        row("electrode", " + ".join(s), electrode, "+".join(s))
    for s in BAND_SUBSETS:
        row("band", " + ".join(s), band, "+".join(s))
    return header, rows


def depth_table(reports: Sequence[dict], task: str) -> tuple[list[str], list[list]]:
    depths = sorted({r["config"]["max_depth"] for r in reports if r["task"] == task})
    conds = [c.value for c in CONDITIONS]
    header = ["max_depth"] + conds
    rows = [[d] + [_lookup(reports, task=task, max_depth=d, condition=c) for c in conds] for d in depths]
    return header, rows


def cross_table(reports: Sequence[dict]) -> tuple[list[str], list[list]]:
    tests = [c.value for c in CONDITIONS] + ["Combined"]
    header = ["task", "trained_on"] + [f"tested_on_{t}" for t in tests]
    rows = []
    for task in TASKS:
        trains = []
        for r in reports:
            if r["task"] == task and r["config"]["train_condition"] not in trains:
                trains.append(r["config"]["train_condition"])
        for tr in trains:
            rows.append(
                [task, tr] + [_lookup(reports, task=task, train_condition=tr, test_condition=te) for te in tests]
            )
    return header, rows


def importance_table(importances: dict[str, float], top: int | None = None) -> tuple[list[str], list[list]]:
    ranked = sorted(importances.items(), key=lambda kv: (-kv[1], kv[0]))
    if top is not None:
        ranked = ranked[:top]
    return ["rank", "feature", "importance"], [[i + 1, k, v] for i, (k, v) in enumerate(ranked)]
