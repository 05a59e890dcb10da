"""``hybridids`` command line: one executable, one subcommand per pipeline stage.

Exit codes: 0 success, 1 usage error, 2 data or validation error. Results go
to files named on the command line; progress messages go to standard error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError, ModelFileError
from .evalreport import StrategyTableConfig, evaluate_ensemble, strategy_table, write_report
from .clustering import fit_clusters, select_k_elbow, wcss_curve
from .flowdata import (
    SchemaConfig,
    encode_features,
    encode_labels,
    encode_table,
    load_schema,
    load_table,
    stratified_split,
    stratified_split_indices,
)
from .hybrid import DEFAULT_PREFERENCE, fit_hybrid, load_ensemble, parse_preference, save_ensemble
from .resample import ResampleConfig, Strategy
from .synthgen import preset, write_synth

logger = logging.getLogger("hybridids")

DEFAULT_SEED = 7
EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _common(p: argparse.ArgumentParser, *, seed=True, schema=False) -> None:
    if seed:
        p.add_argument("--seed", type=int, default=DEFAULT_SEED,
                       help=f"base random seed (default {DEFAULT_SEED})")
    if schema:
        p.add_argument("--schema", required=True,
                       help="schema file (key=value lines) or the preset name 'botiot'")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")


def _cluster_flags(p: argparse.ArgumentParser, k_default: int | None = 3) -> None:
    p.add_argument("--k", type=int, default=k_default,
                   help="number of clusters; 0 selects k by the elbow rule")
    p.add_argument("--k-max", type=int, default=10, help="largest k tried by the elbow rule")
    p.add_argument("--max-iter", type=int, default=300)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--no-scale", action="store_true", help="cluster on unstandardized features")


def _resample_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--smote-k", type=int, default=5)
    p.add_argument("--target-ratio", type=float, default=1.0)
    p.add_argument("--strategy", default=Strategy.PER_CLUSTER.value,
                   choices=[s.value for s in Strategy])


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hybridids", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("synth", help="write a synthetic flow CSV")
    p.add_argument("--preset", default="hetero3", choices=["hetero3", "homogeneous"])
    p.add_argument("--rows", type=int, default=50_000)
    p.add_argument("--normal-frac", type=float, default=0.005)
    p.add_argument("--out", required=True)
    p.add_argument("--schema-out", help="also write the matching schema file")
    _common(p)

    p = sub.add_parser("preprocess", help="encode a flow CSV into numeric features + label")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    _common(p, seed=False, schema=True)

    p = sub.add_parser("split", help="stratified train/test split of a flow CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--train-frac", type=float, default=0.7)
    p.add_argument("--train-out", required=True)
    p.add_argument("--test-out", required=True)
    _common(p, schema=True)

    p = sub.add_parser("cluster", help="WCSS curve (k,wcss) and elbow choice")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True, help="CSV with columns k,wcss")
    p.add_argument("--assignments-out", help="optional CSV of (row, cluster) for the chosen k")
    _cluster_flags(p, k_default=0)
    _common(p, schema=True)

    p = sub.add_parser("train", help="fit the cluster-specialist ensemble")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True, help="ensemble file to write")
    p.add_argument("--prefer", default=",".join(DEFAULT_PREFERENCE),
                   help="comma-separated tie-break order of model kinds")
    p.add_argument("--train-frac", type=float,
                   help="hold out a stratified test split first (needs --test-out)")
    p.add_argument("--test-out", help="where the held-out raw rows are written")
    _cluster_flags(p)
    _resample_flags(p)
    _common(p, schema=True)

    p = sub.add_parser("evaluate", help="per-cluster confusion matrices and accuracy")
    p.add_argument("--model", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--out", required=True, help="output directory")
    _common(p, seed=False)

    p = sub.add_parser("compare-strategies", help="accuracy of every kind x cluster x strategy")
    p.add_argument("--input", required=True, help="training CSV")
    p.add_argument("--test", help="test CSV; without it --train-frac splits --input")
    p.add_argument("--train-frac", type=float, default=0.7)
    p.add_argument("--out", required=True, help="CSV: model,cluster,approach1..3")
    _cluster_flags(p)
    p.add_argument("--smote-k", type=int, default=5)
    p.add_argument("--target-ratio", type=float, default=1.0)
    _common(p, schema=True)

    p = sub.add_parser("predict", help="route and label new rows")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True, help="CSV with columns row,cluster,label")
    _common(p, seed=False)
    return parser


# -- validation helpers -----------------------------------------------------


def _need_file(path: str, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise DataError(f"{what} not found: {p}")
    return p


def _need_parent(path: str) -> Path:
    p = Path(path)
    parent = p.parent if str(p.parent) else Path(".")
    if not parent.is_dir():
        raise DataError(f"output directory does not exist: {parent}")
    return p


def _schema(args) -> SchemaConfig:
    return load_schema(args.schema)


def _k(value: int | None) -> int | None:
    if value is None or value == 0:
        return None
    if value < 0:
        raise DataError("--k must be positive (0 selects k automatically)")
    return value


def _resample_config(args) -> ResampleConfig:
    return ResampleConfig(smote_k=args.smote_k, target_ratio=args.target_ratio, seed=args.seed)


# -- subcommands ------------------------------------------------------------


def cmd_synth(args) -> None:
    out = _need_parent(args.out)
    if args.schema_out:
        _need_parent(args.schema_out)
    cfg = preset(args.preset, args.rows, args.normal_frac, args.seed)
    result = write_synth(cfg, out, args.schema_out)
    logger.info("wrote %d rows (%d normal) to %s", result.table.row_count,
                int(np.count_nonzero(result.labels == 0)), out)


def cmd_preprocess(args) -> None:
    src = _need_file(args.input, "input CSV")
    out = _need_parent(args.out)
    schema = _schema(args)
    data = encode_table(load_table(src, schema), schema)
    with open(out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*data.feature_names, "label"])
        for row, label in zip(data.features, data.labels):
            w.writerow([*(repr(float(v)) for v in row), int(label)])
    n0, n1 = data.class_counts()
    logger.info("encoded %d rows x %d features (%d normal, %d attack)",
                data.n_rows, data.n_features, n0, n1)


def cmd_split(args) -> None:
    src = _need_file(args.input, "input CSV")
    train_out, test_out = _need_parent(args.train_out), _need_parent(args.test_out)
    schema = _schema(args)
    raw = load_table(src, schema)
    tr, te = stratified_split_indices(encode_labels(raw, schema), args.train_frac, args.seed)
    raw.take(tr).write_csv(train_out)
    raw.take(te).write_csv(test_out)
    logger.info("split %d rows into %d train / %d test", raw.row_count, tr.size, te.size)


def cmd_cluster(args) -> None:
    src = _need_file(args.input, "input CSV")
    out = _need_parent(args.out)
    if args.assignments_out:
        _need_parent(args.assignments_out)
    schema = _schema(args)
    data = encode_table(load_table(src, schema), schema)
    scale = not args.no_scale
    curve = wcss_curve(data.features, args.k_max, args.seed, args.max_iter, args.tol, scale)
    elbow = select_k_elbow(curve)
    with open(out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "wcss"])
        w.writerows((k, repr(float(v))) for k, v in curve)
    k = _k(args.k) or elbow
    logger.info("elbow selects k=%d; using k=%d", elbow, k)
    if args.assignments_out:
        model = fit_clusters(data.features, k, args.seed, max_iter=args.max_iter, tol=args.tol,
                             scale=scale)
        labels = model.assign_batch(data.features)
        with open(args.assignments_out, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["row", "cluster"])
            w.writerows(enumerate(int(c) for c in labels))


def cmd_train(args) -> None:
    src = _need_file(args.input, "input CSV")
    out = _need_parent(args.out)
    if (args.train_frac is None) != (args.test_out is None):
        raise UsageError("train: --train-frac and --test-out must be given together")
    if args.test_out:
        _need_parent(args.test_out)
    schema = _schema(args)
    prefer = parse_preference(args.prefer)
    strategy = Strategy.parse(args.strategy)
    k = _k(args.k)
    cfg = _resample_config(args)
    raw = load_table(src, schema)
    if args.train_frac is not None:
        tr, te = stratified_split_indices(encode_labels(raw, schema), args.train_frac, args.seed)
        raw.take(te).write_csv(args.test_out)
        raw = raw.take(tr)
        logger.info("held out %d rows to %s", te.size, args.test_out)
    data = encode_table(raw, schema)
    ensemble = fit_hybrid(data, strategy, cfg, k, prefer, args.seed, k_max=args.k_max,
                          max_iter=args.max_iter, tol=args.tol, scale=not args.no_scale,
                          schema=schema)
    save_ensemble(ensemble, out)
    for rec in ensemble.selections:
        logger.info("cluster %d: %s (%d rows)", rec.cluster, rec.winner, rec.train_row_count)
    logger.info("wrote ensemble (k=%d) to %s", ensemble.k, out)


def _load_model(path: str):
    ensemble = load_ensemble(_need_file(path, "model file"))
    if ensemble.schema is None:
        raise ModelFileError("model file carries no schema; retrain with the CLI")
    return ensemble


def cmd_evaluate(args) -> None:
    model_path = _need_file(args.model, "model file")
    test_path = _need_file(args.test, "test CSV")
    out = Path(args.out)
    if out.exists() and not out.is_dir():
        raise DataError(f"--out must be a directory: {out}")
    ensemble = _load_model(str(model_path))
    test = encode_table(load_table(test_path, ensemble.schema), ensemble.schema,
                        ensemble.encoders)
    report = evaluate_ensemble(ensemble, test)
    write_report(report, out)
    logger.info("overall accuracy %.6f on %d rows; report in %s",
                report.overall_accuracy, report.total, out)


def cmd_compare(args) -> None:
    src = _need_file(args.input, "input CSV")
    test_path = _need_file(args.test, "test CSV") if args.test else None
    out = _need_parent(args.out)
    schema = _schema(args)
    k = _k(args.k)
    if k is None:
        raise UsageError("compare-strategies needs an explicit --k")
    train_data = encode_table(load_table(src, schema), schema)
    if test_path is None:
        train_data, test = stratified_split(train_data, args.train_frac, args.seed)
    else:
        test = encode_table(load_table(test_path, schema), schema, train_data.encoders)
    cfg = StrategyTableConfig(k=k, seed=args.seed,
                              resample=ResampleConfig(args.smote_k, args.target_ratio, args.seed),
                              max_iter=args.max_iter, tol=args.tol, scale=not args.no_scale)
    table = strategy_table(train_data, test, cfg)
    out.write_text(table.to_csv(), encoding="utf-8")
    sys.stderr.write(table.to_text())


def cmd_predict(args) -> None:
    src = _need_file(args.input, "input CSV")
    out = _need_parent(args.out)
    ensemble = _load_model(args.model)
    raw = load_table(src, ensemble.schema, require_label=False)
    X, _, _ = encode_features(raw, ensemble.schema, ensemble.encoders)
    labels, clusters = ensemble.predict_batch(X)
    with open(out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row", "cluster", "label"])
        w.writerows(zip(range(len(labels)), clusters.tolist(), labels.tolist()))
    logger.info("labelled %d rows (%d attack)", len(labels), int(labels.sum()))


COMMANDS = {
    "synth": cmd_synth,
    "preprocess": cmd_preprocess,
    "split": cmd_split,
    "cluster": cmd_cluster,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "compare-strategies": cmd_compare,
    "predict": cmd_predict,
}


def run(argv: Sequence[str] | None = None) -> int:
    """Parse ``argv`` and run one subcommand; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger("hybridids")
    root.handlers[:] = [handler]
    root.setLevel(logging.DEBUG if args.verbose else logging.INFO)
    root.propagate = False
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"hybridids {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ModelFileError, OSError) as exc:
        print(f"hybridids {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
