"""Command-line pipeline driver.

Subcommands read their inputs from configured paths, or from default file
names inside ``--out`` so that stages chain in one directory, and write a
``<command>_report.json`` next to their outputs holding the configuration
and its hash.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from collections import defaultdict
from pathlib import Path

import numpy as np

from railgnss import __version__
from railgnss.classify import (
    confusion,
    gbt_train,
    load_models,
    mlr_train,
    permutation_importance,
    save_models,
)
from railgnss.config import PipelineConfig
from railgnss.context import (
    FeatureSchema,
    build_dataset,
    featurize_journey,
    read_features,
    split,
    to_xy,
    write_features,
)
from railgnss.errormodel import (
    ErrorModelSet,
    fit_error_models,
    histogram_rows,
    read_schedule,
    sample_errors,
    schedule_from_journey,
    write_stream,
)
from railgnss.errors import ConfigError, IngestError, NumericalError
from railgnss.ingest import align, load_observations, parse_ground_truth, parse_labels, parse_nav
from railgnss.residuals import ResidualConfig, read_residuals, residual_dataset, write_residuals
from railgnss.taxonomy import EnvironmentClass

logger = logging.getLogger("railgnss")

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_NUMERICAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _write_report(out, command, config, body):
    doc = {"command": command, "version": __version__, "config_hash": config.hash,
           "config": config.to_dict(), **body}
    path = Path(out) / f"{command.replace('-', '_')}_report.json"
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=1, sort_keys=True, default=_jsonable)
        f.write("\n")


def _jsonable(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if hasattr(x, "__dict__"):
        return vars(x)
    return str(x)


def _journey(config, out, need_labels):
    obs_path = config.input_path("obs", out, "obs.csv")
    nav_path = config.input_path("nav", out, "nav.rnx")
    truth_path = config.input_path("truth", out, "ground_truth.csv")
    labels_path = config.input_path("labels", out, "labels.csv")
    for p in (obs_path, nav_path, truth_path):
        if not p.exists():
            raise IngestError("file not found", path=p)
    obs = load_observations(obs_path, config.signals)
    nav = parse_nav(nav_path)
    track = parse_ground_truth(truth_path)
    timeline = None
    if labels_path.exists():
        timeline = parse_labels(labels_path)
    elif need_labels or config["paths"]["labels"] is not None:
        raise IngestError("file not found", path=labels_path)
    aligned, report = align(obs.epochs, track, timeline)
    if not aligned:
        raise IngestError("no overlap between observation and ground-truth time spans",
                          path=obs_path)
    return obs, nav, aligned, report


def cmd_extract(config, out):
    obs, nav, aligned, align_report = _journey(config, out, need_labels=False)
    r = config["residuals"]
    rcfg = ResidualConfig(r["elevation_cutoff_deg"], r["tropo"], r["iono_policy"],
                          r["clock_grouping"], r["relative_humidity"])
    if nav.iono is None and rcfg.iono_policy == "require":
        raise IngestError("navigation file has no Klobuchar parameters (iono_policy=require)")
    records, _, report = residual_dataset(aligned, nav, nav.iono, rcfg)
    if not records:
        raise IngestError("no residuals could be formed for any epoch")
    write_residuals(Path(out) / "residuals.csv", records)
    _write_report(out, "extract", config, {
        "parse": vars(obs.report), "nav_records": len(nav), "align": vars(align_report),
        "residuals": {"records": len(records), "epochs": report.epochs,
                      "processed": report.processed, "skipped": dict(sorted(report.skipped.items())),
                      "excluded": dict(sorted(report.excluded.items())),
                      "outliers": report.outliers},
    })


def cmd_featurize(config, out):
    obs, nav, aligned, align_report = _journey(config, out, need_labels=False)
    schema = FeatureSchema.from_signals(config.signals)
    f = config["features"]
    vectors = featurize_journey(aligned, nav, schema, f["elevation_cutoff_deg"], f["window"])
    labels = [a.env_class for a in aligned]
    write_features(Path(out) / "features.csv", vectors, schema, labels)
    counts = defaultdict(int)
    for c in labels:
        counts["unlabeled" if c is None else c.name] += 1
    _write_report(out, "featurize", config, {
        "schema_hash": schema.hash, "rows": len(vectors), "labels": dict(sorted(counts.items())),
        "align": vars(align_report),
    })


def _dataset(config, out):
    path = config.input_path("features", out, "features.csv")
    if not path.exists():
        raise IngestError("file not found", path=path)
    schema, vectors, labels = read_features(path)
    samples, report = build_dataset(vectors, labels, config["features"]["policy"])
    t = config["train"]["train_size"]
    n = len(samples)
    train_size = int(round(t * n)) if isinstance(t, float) else t
    if not 0 < train_size < n:
        raise IngestError(f"train_size {train_size} leaves no test data out of {n} samples",
                          path=path)
    train, test = split(samples, train_size, config["seed"])
    return schema, train, test, report


def cmd_train(config, out):
    schema, train, test, report = _dataset(config, out)
    X, y = to_xy(train)
    if len(set(y)) < 2:
        raise IngestError("training data holds a single class")
    t = config["train"]
    seed = config["seed"]
    mlr, cv = mlr_train(X, y, t["mlr"]["lambda_grid"], seed, t["mlr"]["n_folds"],
                        t["mlr"]["max_iter"])
    gbt = gbt_train(X, y, t["gbt"], seed)
    models = {"mlr": mlr, "gbt": gbt}
    save_models(Path(out) / "model.json", models, schema, config.hash,
                {"split": {"seed": seed, "train": len(train), "test": len(test)}})
    _write_report(out, "train", config, {
        "dataset": vars(report), "train_samples": len(train), "test_samples": len(test),
        "cv": vars(cv),
        "train_accuracy": {k: float(np.mean(m.predict(X) == y)) for k, m in models.items()},
        "mlr_loss_monotone": bool(np.all(np.diff(mlr.named_steps["classifier"].loss_curve_) <= 0)),
        "gbt_loss_monotone": bool(np.all(np.diff(gbt.named_steps["classifier"].train_loss_) <= 0)),
    })


def cmd_evaluate(config, out):
    schema, train, test, _ = _dataset(config, out)
    model_path = config.input_path("models", out, "model.json")
    if not model_path.exists():
        raise IngestError("file not found", path=model_path)
    models, doc = load_models(model_path, schema)
    X, y = to_xy(test)
    classes = sorted(set(y) | {c for m in models.values() for c in m.classes_})
    body = {"test_samples": len(test), "accuracy": {}, "model_config_hash": doc.get("config_hash")}
    primary = config["train"]["primary_model"]
    for kind in sorted(models):
        model = models[kind]
        cm = confusion(y, model.predict(X), classes)
        cm.to_csv(Path(out) / f"confusion_{kind}.csv")
        imp = permutation_importance(model, X, y, config["train"]["importance_repeats"],
                                     config["seed"], list(schema.names))
        imp.to_csv(Path(out) / f"importance_{kind}.csv")
        body["accuracy"][kind] = cm.accuracy
        if kind == primary:
            cm.to_csv(Path(out) / "confusion.csv")
            imp.to_csv(Path(out) / "importance.csv")
    _write_report(out, "evaluate", config, body)


def cmd_fit_errors(config, out):
    path = config.input_path("residuals", out, "residuals.csv")
    if not path.exists():
        raise IngestError("file not found", path=path)
    records = read_residuals(path)
    if not records:
        raise IngestError("residual file is empty", path=path)
    e = config["error_models"]
    models = fit_error_models(records, e["grouping"], e["h_fraction"], e["min_samples"],
                              config["seed"], e["reweight"])
    models.save(Path(out) / "error_models.json", config.hash)
    with open(Path(out) / "residual_histograms.csv", "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["class", "constellation", "band", "bin_lo_m", "bin_hi_m", "count"])
        for row in histogram_rows(records, e["histogram_bins"]):
            w.writerow([*row[:3], repr(row[3]), repr(row[4]), row[5]])
    _write_report(out, "fit-errors", config, {
        "records": len(records), "models": len(models.models),
        "too_small": {"|".join(k): n for k, n in sorted(models.too_small.items())},
    })


def cmd_simulate(config, out):
    model_path = config.input_path("error_models", out, "error_models.json")
    if not model_path.exists():
        raise IngestError("file not found", path=model_path)
    try:
        models = ErrorModelSet.load(model_path)
    except (KeyError, json.JSONDecodeError) as exc:
        raise IngestError(f"unreadable error model file: {exc}", path=model_path) from None
    sched_path = config.input_path("schedule", out, "schedule.csv")
    if sched_path.exists():
        schedule = read_schedule(sched_path)
    else:
        obs, _, aligned, _ = _journey(config, out, need_labels=False)
        timeline_path = config.input_path("labels", out, "labels.csv")
        timeline = parse_labels(timeline_path) if timeline_path.exists() else None
        schedule = schedule_from_journey(obs.epochs, timeline)
    s = config["simulate"]
    no_signal = {EnvironmentClass.parse(c) for c in s["no_signal_classes"]}
    try:
        values = sample_errors(models, schedule, config["seed"], no_signal)
    except KeyError as exc:
        raise IngestError(f"unresolvable error model key: {exc}") from None
    write_stream(Path(out) / "injected_errors.csv", schedule, values, s["no_signal_marker"])
    stats = defaultdict(list)
    for e, v in zip(schedule, values):
        if v is not None:
            cls = "unlabeled" if e.env_class is None else e.env_class.name
            stats[f"{cls}|{e.satellite_id[0]}|{e.band_code}"].append(v)
    _write_report(out, "simulate", config, {
        "samples": sum(v is not None for v in values),
        "no_signal": sum(v is None for v in values),
        "empirical": {k: {"n": len(v), "mean_m": float(np.mean(v)),
                          "var_m2": float(np.var(v, ddof=1)) if len(v) > 1 else None}
                      for k, v in sorted(stats.items())},
    })


def cmd_synth(config, out):
    from railgnss.synth import SynthConfig, generate, write_scenario

    r = config["residuals"]
    sc = SynthConfig(epochs=config["synth"]["epochs"], signals=config.signals,
                     zero_error=config["synth"]["zero_error"],
                     elevation_cutoff_deg=r["elevation_cutoff_deg"],
                     relative_humidity=r["relative_humidity"])
    scenario = generate(sc, config["seed"])
    files = write_scenario(scenario, out, config.hash)
    _write_report(out, "synth", config, {
        "epochs": len(scenario.epochs),
        "observations": sum(len(e.observations) for e in scenario.epochs),
        "schedule_entries": len(scenario.schedule),
        "files": sorted(Path(p).name for p in files.values()),
    })


COMMANDS = {
    "extract": (cmd_extract, "pseudorange residuals -> residuals.csv"),
    "featurize": (cmd_featurize, "per-epoch context features -> features.csv"),
    "train": (cmd_train, "fit MLR and GBT classifiers -> model.json"),
    "evaluate": (cmd_evaluate, "confusion matrices and feature importance"),
    "fit-errors": (cmd_fit_errors, "robust Gaussian error models -> error_models.json"),
    "simulate": (cmd_simulate, "sample an error stream -> injected_errors.csv"),
    "synth": (cmd_synth, "generate a synthetic journey"),
}


def build_parser():
    parser = _Parser(prog="railgnss", description="GNSS railway local-error toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="YAML configuration file")
        p.add_argument("--seed", type=_u64, help="master seed (overrides the config)")
        p.add_argument("--out", default=".", help="output directory (default: .)")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _u64(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def main(argv=None):
    """Run one subcommand; returns the process exit code."""
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"railgnss: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = PipelineConfig.load(args.config, args.seed)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command][0](config, out)
    except ConfigError as exc:
        print(f"railgnss: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"railgnss: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (IngestError, OSError, ValueError, LookupError) as exc:
        print(f"railgnss: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


def main_entry():
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
