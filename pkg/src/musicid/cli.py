"""``musicid`` command line.

Exit codes: 0 success, 2 usage error, 3 data error, 4 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections import Counter
from pathlib import Path

from . import plotting
from .anova import anova_f, anova_per_feature
from .config import DATASET_ENV, RunConfig, resolve
from .errors import DataError, MissingInput, MusicIDError, UsageError, DimensionMismatch
from .evaluation import (
    COMBINED,
    IDENTIFICATION,
    TASKS,
    VERIFICATION,
    ablate,
    cross_condition_table,
    cross_validate,
    depth_sweep,
    score_identification,
    score_verification,
    split_matrix,
)
from .features import FeatureMatrix, featurize_dataset, featurize_session, select_features
from .forest import Forest, OvrModel, feature_importance, load_model, model_to_json, train_forest, train_ovr
from .ingest import (
    CONDITIONS,
    Condition,
    discover_sessions,
    drop_delta,
    parse_session,
    session_path,
    serialize_session,
    validate_session,
    load_dataset,
    write_dataset,
)
from . import report as rpt
from .synth import PAPER_SESSIONS, CohortSpec, generate_cohort

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 2, 3, 4

log = logging.getLogger("musicid")


# ---- shared helpers ------------------------------------------------------

def _config(args) -> RunConfig:
    keys = [
        "dataset", "features", "output", "frame_len", "hop", "n_trees", "max_depth", "mtry",
        "min_samples_split", "seed", "train_fraction", "gap", "cv_folds", "threshold", "channels",
        "signals", "stats", "condition", "threads", "formats",
    ]
    overrides = {k: getattr(args, k, None) for k in keys}
    if getattr(args, "no_bootstrap", False):
        overrides["bootstrap"] = False
    return resolve(getattr(args, "config", None), overrides)


def _outdir(cfg: RunConfig) -> Path:
    p = Path(cfg.output)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _load_features(cfg: RunConfig) -> FeatureMatrix:
    if cfg.features:
        path = Path(cfg.features)
        if not path.is_file():
            raise MissingInput(f"feature file not found: {path}")
        matrix = FeatureMatrix.from_csv(path.read_bytes())
    elif cfg.dataset:
        matrix = featurize_dataset(load_dataset(cfg.dataset), cfg.frame_len, cfg.hop)
    else:
        raise UsageError(f"give --features or --dataset (or set {DATASET_ENV})")
    if cfg.channels or cfg.signals or cfg.stats:
        matrix = select_features(matrix, cfg.channels, cfg.signals, cfg.stats)
    return matrix


def _condition_matrix(matrix: FeatureMatrix, condition: str) -> FeatureMatrix:
    if condition == COMBINED:
        return matrix
    sub = matrix.where_condition(condition)
    if not len(sub):
        raise DataError(f"no feature rows for condition {condition}")
    return sub


def _emit(cfg: RunConfig, out: Path, stem: str, payload: dict, table=None, title: str = "") -> None:
    if cfg.wants("json"):
        rpt.write_json(out / f"{stem}.json", payload)
    if table is not None:
        header, rows = table
        if cfg.wants("csv"):
            rpt.write_csv(out / f"{stem}.csv", header, rows)
        if cfg.wants("txt"):
            (out / f"{stem}.txt").write_text((title + "\n" if title else "") + rpt.text_table(header, rows))


def _print(obj) -> None:
    sys.stdout.write(rpt.dumps(obj))


# ---- subcommands ---------------------------------------------------------

def cmd_synth(args) -> int:
    cfg = _config(args)
    root = Path(args.dataset_out or cfg.dataset or "")
    if not str(root):
        raise UsageError("give --dataset-out (or --dataset) for the generated cohort")
    if args.sessions == "paper":
        sessions = PAPER_SESSIONS if args.users == len(PAPER_SESSIONS) else None
        if sessions is None:
            raise UsageError(f"the paper session layout needs --users {len(PAPER_SESSIONS)}")
    else:
        counts = [int(s) for s in args.sessions.split(",")]
        sessions = tuple(counts * args.users if len(counts) == 1 else counts)
    spec = CohortSpec(
        n_users=args.users,
        sessions_per_user=sessions,
        samples_per_session=args.samples,
        separation=args.separation,
        condition_shift=args.condition_shift,
        rho=args.rho,
        informative=tuple(args.informative) if args.informative else CohortSpec.informative,
        seed=cfg.seed,
        frame_len=cfg.frame_len,
    )
    paths = write_dataset(root, generate_cohort(spec))
    rpt.write_json(root / "cohort.json", spec.to_dict())
    _print({"dataset": str(root), "sessions": len(paths), "users": spec.n_users})
    return EXIT_OK


def cmd_ingest(args) -> int:
    cfg = _config(args)
    out = _outdir(cfg)
    mapping = None
    if args.mapping:
        try:
            mapping = json.loads(Path(args.mapping).read_text())
        except json.JSONDecodeError as exc:
            raise UsageError(f"--mapping is not valid JSON: {exc}") from None
        if not isinstance(mapping, dict):
            raise UsageError("--mapping must be a JSON object")
    jobs = []
    for raw in args.inputs:
        p = Path(raw)
        if p.is_dir():
            jobs.extend((u, c, i, f) for u, c, i, f in discover_sessions(p))
        elif p.is_file():
            if not (args.user and args.condition_meta and args.session):
                raise UsageError(f"{p}: single files need --user, --session-condition and --session")
            jobs.append((args.user, Condition(args.condition_meta), args.session, p))
        else:
            raise MissingInput(f"input not found: {p}")
    if not jobs:
        raise MissingInput("no session files found")
    dest = out / "dataset"
    summary = []
    for user, cond, idx, path in jobs:
        try:
            session = parse_session(path.read_bytes(), user, cond, idx, mapping)
        except DataError as exc:
            raise DataError(f"{path}: {exc}") from exc
        v = validate_session(session, args.expected_samples)
        target = session_path(dest, user, cond, idx)
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(serialize_session(session))
        summary.append({
            "source": str(path), "normalized": str(target.relative_to(out)), "user_id": user,
            "condition": cond.value, "session_index": idx, "sample_count": session.sample_count,
            "dropped_rows": session.dropped_rows, "validation": v.to_dict(),
        })
        if not v.ok:
            log.warning("%s: validation issues (see summary)", path)
    per_condition = Counter(s["condition"] for s in summary)
    result = {"sessions": summary, "n_sessions": len(summary), "per_condition": dict(per_condition),
              "users": sorted({s["user_id"] for s in summary})}
    rpt.write_json(out / "ingest_summary.json", result)
    _print({"n_sessions": len(summary), "per_condition": dict(per_condition), "summary": str(out / "ingest_summary.json")})
    return EXIT_OK


def cmd_featurize(args) -> int:
    cfg = _config(args)
    if not cfg.dataset:
        raise UsageError(f"give --dataset (or set {DATASET_ENV})")
    matrix = featurize_dataset(load_dataset(cfg.dataset), cfg.frame_len, cfg.hop)
    out = _outdir(cfg)
    target = Path(args.features_out) if args.features_out else out / "features.csv"
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_bytes(matrix.to_csv())
    _print({"features": str(target), "rows": len(matrix), "columns": matrix.n_features})
    return EXIT_OK


def _train_model(cfg: RunConfig, train: FeatureMatrix, task: str):
    params = cfg.forest_params()
    if task == IDENTIFICATION:
        model = train_forest(train, params, cfg.threads)
    else:
        model = train_ovr(train, params, cfg.threshold, cfg.threads)
    model.metadata.update({"frame_len": cfg.frame_len, "hop": cfg.hop, "task": task})
    return model


def cmd_train(args) -> int:
    cfg = _config(args)
    task = args.task
    out = _outdir(cfg)
    matrix = _condition_matrix(_load_features(cfg), cfg.condition)
    train, test = split_matrix(matrix, cfg.split_spec())
    model = _train_model(cfg, train, task)
    (out / f"model_{task}.json").write_text(model_to_json(model), encoding="utf-8")

    if task == IDENTIFICATION:
        report = score_identification(model, test, {"run": cfg.echo()})
        imp = feature_importance(model)
        report.importances = dict(zip(model.feature_names, imp.tolist()))
    else:
        report = score_verification(model, test, {"run": cfg.echo()})
    payload = {"experiment": "train", "task": task, "config": cfg.echo(), "n_train": len(train),
               "n_test": len(test), "test": report.to_dict()}
    if not args.no_cv:
        payload["cross_validation"] = cross_validate(
            train, cfg.forest_params(), cfg.cv_folds, cfg.seed, task, cfg.threads, cfg.threshold
        )
    _emit(cfg, out, f"train_{task}", payload)
    if cfg.wants("csv"):
        (out / f"confusion_{task}.csv").write_text(rpt.confusion_csv(report))
    if cfg.wants("png"):
        plotting.confusion_figure(report.confusion, report.labels, out / f"confusion_{task}.png",
                                  f"{task} ({cfg.condition})")

    if args.depth_sweep:
        depths = [int(d) for d in args.depth_sweep.split(",")]
        conds = None if cfg.condition == COMBINED else [cfg.condition]
        reports = depth_sweep(_load_features(cfg), depths, cfg.forest_params(), cfg.split_spec(), (task,),
                              conds, cfg.threads, cfg.threshold)
        _emit(cfg, out, f"depth_sweep_{task}", rpt.experiment_payload("depth_sweep", cfg.echo(), reports),
              rpt.depth_table([r.to_dict() for r in reports], task), f"{task}: accuracy on test set")

    summary = {"model": str(out / f"model_{task}.json"), "test_accuracy": report.accuracy}
    if "cross_validation" in payload:
        summary["cv_accuracy"] = payload["cross_validation"]["mean_accuracy"]
    _print(summary)
    return EXIT_OK


def _session_features(cfg: RunConfig, model, session_file: str, condition: str) -> FeatureMatrix:
    meta = model.metadata
    frame_len, hop = int(meta.get("frame_len", cfg.frame_len)), int(meta.get("hop", cfg.hop))
    if cfg.frame_len != frame_len or cfg.hop != hop:
        raise DimensionMismatch(
            f"model was trained with frame_len={frame_len}, hop={hop}; got frame_len={cfg.frame_len}, hop={cfg.hop}"
        )
    path = Path(session_file)
    if not path.is_file():
        raise MissingInput(f"session file not found: {path}")
    session = parse_session(path.read_bytes(), "unknown", condition, 1)
    matrix = featurize_session(drop_delta(session), frame_len, hop)
    names = model.feature_names
    if names == matrix.feature_names:
        return matrix
    missing = [n for n in names if n not in matrix.feature_names]
    if missing:
        raise DimensionMismatch(f"model expects features absent from session: {missing[:5]}")
    cols = [matrix.feature_names.index(n) for n in names]
    return FeatureMatrix(matrix.X[:, cols], matrix.users, matrix.conditions, matrix.sessions, matrix.frames, names)


def _model_defaults(args, model) -> None:
    # model metadata supplies framing unless the user set it explicitly
    for key in ("frame_len", "hop"):
        if getattr(args, key, None) is None:
            setattr(args, key, model.metadata.get(key))


def cmd_identify(args) -> int:
    model = load_model(args.model)
    if not isinstance(model, Forest):
        raise UsageError("identify needs an identification model")
    _model_defaults(args, model)
    cfg = _config(args)
    matrix = _session_features(cfg, model, args.session_file, args.session_condition)
    labels, fractions = model.predict_many(matrix.X)
    frames = [
        {"frame": int(i), "predicted": str(lab), "votes": dict(zip(model.label_set, map(float, fr)))}
        for i, (lab, fr) in enumerate(zip(labels, fractions))
    ]
    counts = Counter(labels.tolist())
    best = max(counts.values())
    majority = min(u for u, c in counts.items() if c == best)
    result = {"session_file": args.session_file, "n_frames": len(frames), "frames": frames,
              "session_decision": {"user": majority, "frame_votes": best,
                                   "note": "session-level majority over frame predictions (extension)"}}
    out = _outdir(cfg)
    rpt.write_json(out / "identify.json", result)
    _print({"predicted_user": majority, "n_frames": len(frames), "frame_predictions": labels.tolist()})
    return EXIT_OK


def cmd_verify(args) -> int:
    model = load_model(args.model)
    if not isinstance(model, OvrModel):
        raise UsageError("verify needs a verification (one-vs-rest) model")
    _model_defaults(args, model)
    cfg = _config(args)
    if args.threshold is not None:
        model = model.with_threshold(cfg.threshold)
    matrix = _session_features(cfg, model, args.session_file, args.session_condition)
    scores = model.scores(matrix.X, args.claim)
    accept = scores >= model.threshold
    frames = [{"frame": i, "score": float(s), "accept": bool(a)} for i, (s, a) in enumerate(zip(scores, accept))]
    decision = bool(accept.sum() * 2 > len(accept))
    result = {"claimed_user": args.claim, "threshold": model.threshold, "frames": frames,
              "session_decision": {"accept": decision, "accepted_frames": int(accept.sum()),
                                   "note": "session-level majority over frame decisions (extension)"}}
    rpt.write_json(_outdir(cfg) / "verify.json", result)
    _print({"claimed_user": args.claim, "accept": decision, "accepted_frames": int(accept.sum()),
            "n_frames": len(frames)})
    return EXIT_OK


def _ablation_figure(out: Path, stem: str, reports) -> None:
    subsets = []
    for r in reports:
        if r.config["subset"] not in subsets:
            subsets.append(r.config["subset"])
    series = {}
    for r in reports:
        key = f"{r.config['condition']}/{r.task}"
        series.setdefault(key, {})[r.config["subset"]] = r.accuracy
    plotting.accuracy_bars(subsets, {k: [v.get(s) for s in subsets] for k, v in series.items()},
                           out / f"{stem}.png", stem.replace("_", " "))


def cmd_ablate(args) -> int:
    cfg = _config(args)
    out = _outdir(cfg)
    matrix = _load_features(cfg)
    tasks = TASKS if args.task == "both" else (args.task,)
    axes = ("electrode", "band") if args.axis == "both" else (args.axis,)
    conds = None if cfg.condition == COMBINED or args.all_conditions else [cfg.condition]
    results = {}
    for axis in axes:
        reports = ablate(matrix, axis, None, cfg.forest_params(), cfg.split_spec(), conds, tasks,
                         True, cfg.threads, cfg.threshold)
        results[axis] = [r.to_dict() for r in reports]
        stem = f"ablation_{axis}"
        header, rows = rpt.summary_table(None, results[axis] if axis == "electrode" else None,
                                         results[axis] if axis == "band" else None)
        block_rows = [r for r in rows if r[0] in ("all", axis)]
        _emit(cfg, out, stem, rpt.experiment_payload("ablation", cfg.echo(), reports, axis=axis),
              (header, block_rows), f"{axis} ablation")
        if cfg.wants("png"):
            _ablation_figure(out, stem, reports)
    _print({axis: {f"{r['config']['condition']}/{r['config']['subset']}/{r['task']}": r["accuracy"]
                   for r in rs} for axis, rs in results.items()})
    return EXIT_OK


def cmd_cross_eval(args) -> int:
    cfg = _config(args)
    out = _outdir(cfg)
    matrix = _load_features(cfg)
    tasks = TASKS if args.task == "both" else (args.task,)
    reports = cross_condition_table(matrix, cfg.forest_params(), tasks, cfg.split_spec(), not args.no_combined,
                                    cfg.threads, cfg.threshold)
    dicts = [r.to_dict() for r in reports]
    _emit(cfg, out, "cross_condition", rpt.experiment_payload("cross_condition", cfg.echo(), reports),
          rpt.cross_table(dicts), "cross-condition training and testing")
    _print({f"{r['task']}:{r['config']['train_condition']}->{r['config']['test_condition']}": r["accuracy"]
            for r in dicts})
    return EXIT_OK


def cmd_anova(args) -> int:
    cfg = _config(args)
    out = _outdir(cfg)
    matrix = _load_features(cfg)
    if cfg.condition != COMBINED and not args.all_conditions:
        matrix = _condition_matrix(matrix, cfg.condition)
    pooled = anova_f(matrix)
    per = anova_per_feature(matrix)
    rows = [[n, None if r is None else r.f_statistic, None if r is None else r.p_value]
            for n, r in zip(matrix.feature_names, per)]
    payload = {"experiment": "anova", "config": cfg.echo(), "pooled": pooled.to_dict(),
               "per_feature": {n: (None if r is None else r.to_dict()) for n, r in zip(matrix.feature_names, per)}}
    if cfg.wants("json"):
        rpt.write_json(out / "anova.json", payload)
    if cfg.wants("csv"):
        rpt.write_csv(out / "anova_per_feature.csv", ["feature", "f_statistic", "p_value"], rows)
    _print({"pooled_f": pooled.f_statistic, "df": [pooled.df_between, pooled.df_within],
            "p_value": pooled.p_value})
    return EXIT_OK


def cmd_importance(args) -> int:
    cfg = _config(args)
    out = _outdir(cfg)
    matrix = _condition_matrix(_load_features(cfg), cfg.condition)
    train, _ = split_matrix(matrix, cfg.split_spec())
    forest = train_forest(train, cfg.forest_params(), cfg.threads)
    imp = feature_importance(forest)
    importances = dict(zip(forest.feature_names, imp.tolist()))
    header, rows = rpt.importance_table(importances)
    payload = {"experiment": "importance", "config": cfg.echo(), "importances": importances,
               "ranking": [r[1] for r in rows]}
    _emit(cfg, out, "importance", payload, (header, rows), "gini importance")
    if cfg.wants("png"):
        plotting.importance_figure(forest.feature_names, imp.tolist(), out / "importance.png")
        picks = [rows[0][1], rows[1][1], rows[-1][1]] if len(rows) >= 3 else [r[1] for r in rows]
        for name in picks:
            j = matrix.feature_names.index(name)
            plotting.feature_boxplot(matrix.X[:, j], matrix.users, name, out / f"box_{name}.png")
    _print({"top": [r[1] for r in rows[: args.top]]})
    return EXIT_OK


REPORT_INPUTS = {
    "depth_identification": "depth_sweep_identification.json",
    "depth_verification": "depth_sweep_verification.json",
    "electrode": "ablation_electrode.json",
    "band": "ablation_band.json",
    "cross": "cross_condition.json",
    "importance": "importance.json",
    "anova": "anova.json",
}


def cmd_report(args) -> int:
    cfg = _config(args)
    src = Path(args.inputs or cfg.output)
    if not src.is_dir():
        raise MissingInput(f"experiment directory not found: {src}")
    loaded = {k: rpt.read_json(src / f) for k, f in REPORT_INPUTS.items() if (src / f).is_file()}
    if not loaded:
        raise MissingInput(f"no experiment outputs in {src}")
    missing = sorted(set(REPORT_INPUTS) - set(loaded))
    for m in missing:
        log.warning("missing input %s: marked absent", REPORT_INPUTS[m])
    out = Path(args.report_out) if args.report_out else src / "report"
    out.mkdir(parents=True, exist_ok=True)

    tables = {}
    for task, key, name in ((IDENTIFICATION, "depth_identification", "table3_identification_depth"),
                            (VERIFICATION, "depth_verification", "table4_verification_depth")):
        if key in loaded:
            tables[name] = rpt.depth_table(loaded[key]["reports"], task)
        else:
            tables[name] = (["max_depth"] + [c.value for c in CONDITIONS], [[None, None, None]])
    if "importance" in loaded:
        tables["table5_importance"] = rpt.importance_table(loaded["importance"]["importances"], top=20)
    else:
        tables["table5_importance"] = (["rank", "feature", "importance"], [[None, None, None]])
    if "cross" in loaded:
        tables["table6_cross_condition"] = rpt.cross_table(loaded["cross"]["reports"])
    else:
        tables["table6_cross_condition"] = (["task", "trained_on"], [[None, None]])
    electrode = loaded.get("electrode", {}).get("reports")
    band = loaded.get("band", {}).get("reports")
    tables["table7_summary"] = rpt.summary_table(None, electrode, band)

    text = []
    for name, (header, rows) in tables.items():
        rpt.write_csv(out / f"{name}.csv", header, rows)
        text.append(f"== {name} ==\n" + rpt.text_table(header, rows, percent=name != "table5_importance"))
    if "anova" in loaded:
        pooled = loaded["anova"]["pooled"]
        text.append(f"== anova ==\npooled F = {pooled['f_statistic']}, df = ({pooled['df_between']}, "
                    f"{pooled['df_within']}), p = {pooled['p_value']}\n")
    (out / "summary.txt").write_text("\n".join(text))
    rpt.write_json(out / "summary.json", {
        "tables": {n: {"header": h, "rows": r} for n, (h, r) in tables.items()},
        "anova": loaded.get("anova", {}).get("pooled"),
        "absent_inputs": [REPORT_INPUTS[m] for m in missing],
    })
    header, rows = tables["table7_summary"]
    groups = [r[1] for r in rows]
    series = {h: [r[i + 2] for r in rows] for i, h in enumerate(header[2:])}
    plotting.accuracy_bars(groups, series, out / "table7_summary.png", "summary of results")
    sys.stdout.write("\n".join(text))
    return EXIT_OK


# ---- parser --------------------------------------------------------------

def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("run configuration (overrides --config)")
    g.add_argument("--config", help="JSON run configuration file")
    g.add_argument("--dataset", help=f"dataset root (env {DATASET_ENV})")
    g.add_argument("--features", help="feature CSV produced by 'featurize'")
    g.add_argument("--output", "-o", help="output directory")
    g.add_argument("--frame-len", dest="frame_len", type=int)
    g.add_argument("--hop", type=int)
    g.add_argument("--n-trees", dest="n_trees", type=int)
    g.add_argument("--max-depth", dest="max_depth", type=int)
    g.add_argument("--mtry", type=int)
    g.add_argument("--min-samples-split", dest="min_samples_split", type=int)
    g.add_argument("--no-bootstrap", action="store_true")
    g.add_argument("--seed", type=int)
    g.add_argument("--train-fraction", dest="train_fraction", type=float)
    g.add_argument("--gap", type=int, help="drop N train frames before each test block")
    g.add_argument("--cv-folds", dest="cv_folds", type=int)
    g.add_argument("--threshold", type=float, help="verification acceptance threshold in (0, 1)")
    g.add_argument("--channels", nargs="+", help="electrode subset, e.g. AF7 AF8")
    g.add_argument("--signals", nargs="+", help="signal subset, e.g. Alpha Beta")
    g.add_argument("--stats", nargs="+", help="statistic subset: mean max min zcr")
    g.add_argument("--condition", choices=["SameSong", "FavoriteSong", "Combined"])
    g.add_argument("--threads", type=int)
    g.add_argument("--formats", nargs="+", choices=["json", "csv", "txt", "png"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="musicid", description="Music-stimulated EEG user authentication.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic cohort in the canonical CSV layout")
    _common(p)
    p.add_argument("--dataset-out", help="root directory for the generated sessions")
    p.add_argument("--users", type=int, default=20)
    p.add_argument("--sessions", default="paper", help="'paper' or per-user counts, e.g. 2 or 5,5,3")
    p.add_argument("--samples", type=int, default=300)
    p.add_argument("--separation", type=float, default=3.0)
    p.add_argument("--condition-shift", dest="condition_shift", type=float, default=0.0)
    p.add_argument("--rho", type=float, default=0.9)
    p.add_argument("--informative", nargs="+", help="signals carrying user differences")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="parse, validate and normalize session CSV files")
    _common(p)
    p.add_argument("inputs", nargs="+", help="session files or dataset directories")
    p.add_argument("--mapping", help="JSON object mapping canonical column names to file column names")
    p.add_argument("--user")
    p.add_argument("--session-condition", dest="condition_meta", choices=[c.value for c in CONDITIONS])
    p.add_argument("--session", type=int)
    p.add_argument("--expected-samples", dest="expected_samples", type=int, default=300)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("featurize", help="frame sessions and write the 80-column feature CSV")
    _common(p)
    p.add_argument("--features-out", help="target CSV (default <output>/features.csv)")
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("train", help="train an identification or verification model")
    _common(p)
    p.add_argument("--task", choices=TASKS, default=IDENTIFICATION)
    p.add_argument("--no-cv", action="store_true", help="skip k-fold cross-validation")
    p.add_argument("--depth-sweep", help="comma-separated depths, e.g. 5,10,15")
    p.set_defaults(func=cmd_train)

    for name, func, helptext in (("identify", cmd_identify, "predict the user of a session"),
                                 ("verify", cmd_verify, "accept or reject a claimed user for a session")):
        p = sub.add_parser(name, help=helptext)
        _common(p)
        p.add_argument("--model", required=True)
        p.add_argument("session_file")
        p.add_argument("--session-condition", dest="session_condition", default="SameSong",
                       choices=[c.value for c in CONDITIONS])
        if name == "verify":
            p.add_argument("--claim", required=True, help="claimed user id")
        p.set_defaults(func=func)

    p = sub.add_parser("ablate", help="electrode / band subset ablation")
    _common(p)
    p.add_argument("--axis", choices=["electrode", "band", "both"], default="both")
    p.add_argument("--task", choices=list(TASKS) + ["both"], default="both")
    p.add_argument("--all-conditions", action="store_true")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("cross-eval", help="cross-condition and combined training")
    _common(p)
    p.add_argument("--task", choices=list(TASKS) + ["both"], default="both")
    p.add_argument("--no-combined", action="store_true")
    p.set_defaults(func=cmd_cross_eval)

    p = sub.add_parser("anova", help="one-way ANOVA of features grouped by user")
    _common(p)
    p.add_argument("--all-conditions", action="store_true")
    p.set_defaults(func=cmd_anova)

    p = sub.add_parser("importance", help="gini feature importance ranking and figures")
    _common(p)
    p.add_argument("--top", type=int, default=20)
    p.set_defaults(func=cmd_importance)

    p = sub.add_parser("report", help="consolidate experiment outputs into summary tables")
    _common(p)
    p.add_argument("--inputs", help="directory of experiment outputs (default --output)")
    p.add_argument("--report-out", help="target directory (default <inputs>/report)")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (MusicIDError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
