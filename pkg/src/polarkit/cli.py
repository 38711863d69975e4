"""Command line interface: seeded, reproducible pipeline subcommands.

Exit codes: 0 success, 1 usage error, 2 data validation error. Every
subcommand that writes files takes --out and writes nothing outside it;
each output directory gets exactly one manifest.json recording the command
line, seed, input digests, tool version, and timestamp.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__, appraisal, assemble, augment, core, score

CONFUSABLES_ENV = "POLARKIT_CONFUSABLES"


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; the contract here is 1.
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_manifest(out_dir: Path, argv, seed, inputs) -> None:
    manifest = {
        "command": ["polarkit", *argv],
        "seed": seed,
        "inputs": {str(p): _sha256(Path(p)) for p in inputs},
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_confusables(path_arg) -> augment.ConfusablesTable:
    if path_arg:
        return augment.load_confusables(path_arg)
    env = os.environ.get(CONFUSABLES_ENV)
    if env:
        return augment.load_confusables(env)
    return augment.default_confusables()


def _cmd_augment(args, argv) -> int:
    schema = core.get_schema(args.subtask)
    if schema.subtask_id != "S1" and not args.force:
        sys.stderr.write(
            "augmentation is off by default for subtasks 2 and 3; "
            "pass --force to enable it\n")
        return 1
    fractions = {t: args.per_technique_frac for t in augment.TECHNIQUES}
    for override in args.technique_frac or ():
        tech, _, value = override.partition("=")
        try:
            fractions[tech] = float(value)
        except ValueError:
            sys.stderr.write(f"bad --technique-frac value: {override!r}\n")
            return 1
        if tech not in augment.TECHNIQUES:
            sys.stderr.write(f"unknown technique in --technique-frac: {tech!r}\n")
            return 1
    total = args.total_frac if args.total_frac is not None else sum(fractions.values())
    plan = augment.AugmentationPlan(
        total_fraction=total, per_technique_fraction=fractions,
        seed=args.seed, homoglyph_char_rate=args.homoglyph_rate)
    table = _load_confusables(args.confusables)
    ds = core.read_dataset(args.input, schema)
    augmented = augment.apply_augmentation(ds, plan, table)
    out = _out_dir(args)
    core.write_dataset(augmented, out / "augmented.jsonl")
    inputs = [args.input] + ([args.confusables] if args.confusables else [])
    _write_manifest(out, argv, args.seed, inputs)
    print(f"{len(augmented)} records "
          f"({len(augmented) - len(ds)} added after dedup)")
    return 0


def _cmd_assemble(args, argv) -> int:
    schema = core.get_schema(args.subtask)
    train = core.read_dataset(args.train, schema)
    dev = core.read_dataset(args.dev, schema)
    merged = assemble.merge_and_dedup(train, dev)
    out = _out_dir(args)
    core.write_dataset(merged, out / "merged.jsonl")
    _write_manifest(out, argv, None, [args.train, args.dev])
    print(f"{len(merged)} records after merge and dedup")
    return 0


def _cmd_sample(args, argv) -> int:
    schema = core.get_schema(args.subtask)
    ds = core.read_dataset(args.input, schema)
    if args.mode == "binary":
        plan = assemble.ValidationPlan("per_language_per_label",
                                       per_cell_count=args.per_cell, seed=args.seed)
        result = assemble.sample_validation_binary(ds, plan)
    else:
        plan = assemble.ValidationPlan("per_language_distributional",
                                       per_cell_count=args.per_cell, seed=args.seed)
        result = assemble.sample_validation_multilabel(ds, plan)
    for lang, label, available in result.shortfalls:
        where = "all labels" if label is None else f"label={label}"
        sys.stderr.write(
            f"shortfall: lang={lang} {where} available={available}\n")
    out = _out_dir(args)
    core.write_dataset(result.validation, out / "validation.jsonl")
    core.write_dataset(result.train_rest, out / "train.jsonl")
    assemble.write_split_manifest(result, out / "split_manifest.tsv")
    _write_manifest(out, argv, args.seed, [args.input])
    print(f"{len(result.validation)} validation records, "
          f"{len(result.train_rest)} train records")
    return 0


def _cmd_score(args, argv) -> int:
    schema = core.get_schema(args.subtask)
    gold = core.read_dataset(args.gold, schema)
    preds = score.read_predictions(args.pred, schema)
    report = score.per_language_report(preds, gold)
    out = _out_dir(args)
    score.report_to_csv(report, out / "report.csv")
    score.summary_to_csv(report, out / "summary.csv")
    _write_manifest(out, argv, None, [args.pred, args.gold])
    print(f"scored {len(report.per_language)} languages")
    return 0


def _cmd_delta(args, argv) -> int:
    mine = score.read_summary_csv(args.mine)
    baseline = score.read_summary_csv(args.baseline)
    table = score.baseline_delta(mine, baseline)
    out = _out_dir(args)
    score.delta_to_csv(table, out / "delta.csv")
    _write_manifest(out, argv, None, [args.mine, args.baseline])
    print(f"Average {table.average:.4f}")
    return 0


def _cmd_percentile(args, argv) -> int:
    scores = score.read_leaderboard(args.leaderboard)
    pct = score.rank_percentile(args.mine, scores)
    print(f"{pct:.1f}")
    if args.out:
        out = _out_dir(args)
        with open(out / "percentile.txt", "w", encoding="utf-8") as fh:
            fh.write(f"{pct:.1f}\n")
        _write_manifest(out, argv, None, [args.leaderboard])
    return 0


def _join_features_labels(features_path, labels_path, schema):
    features = appraisal.read_features(features_path)
    ds = core.read_dataset(labels_path, schema)
    by_id = {r.id: r for r in ds.records}
    labels = []
    for f in features:
        rec = by_id.get(f.id)
        if rec is None:
            raise core.ValidationError(f"no label record for feature id {f.id!r}")
        if rec.labels is None:
            raise core.ValidationError(f"label record {f.id!r} is unlabeled")
        labels.append(rec.labels)
    return features, labels


def _cmd_lr_train(args, argv) -> int:
    schema = core.get_schema(args.subtask)
    features, labels = _join_features_labels(args.features, args.labels, schema)
    cfg = appraisal.LRConfig(seed=args.seed)
    model = appraisal.lr_train(features, labels, cfg)
    out = _out_dir(args)
    appraisal.save_model(model, out / "model.json")
    _write_manifest(out, argv, args.seed, [args.features, args.labels])
    print(f"trained {len(model.label_names)} label classifiers "
          f"on {len(features)} examples")
    return 0


def _cmd_lr_eval(args, argv) -> int:
    schema = core.get_schema(args.subtask)
    features, labels = _join_features_labels(args.features, args.labels, schema)
    report = appraisal.evaluate_per_language(features, labels, seed=args.seed)
    out = _out_dir(args)
    score.report_to_csv(report, out / "report.csv")
    score.summary_to_csv(report, out / "summary.csv")
    _write_manifest(out, argv, args.seed, [args.features, args.labels])
    print(f"evaluated {len(report.per_language)} languages")
    return 0


def _cmd_emit_config(args, argv) -> int:
    schema = core.get_schema(args.subtask)
    config = core.emit_training_config(schema)
    out = _out_dir(args)
    with open(out / "training_config.json", "w", encoding="utf-8") as fh:
        json.dump(config.to_dict(), fh, indent=2)
        fh.write("\n")
    _write_manifest(out, argv, None, [])
    print(f"selection metric: {config.selection_metric}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="polarkit",
                     description="Corpus toolkit for polarization detection "
                                 "datasets: augment, assemble, sample, score.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=func)
        return p

    p = add("augment", _cmd_augment, "append transformed duplicates, then dedup")
    p.add_argument("--input", required=True)
    p.add_argument("--subtask", required=True, choices=["1", "2", "3"])
    p.add_argument("--out", required=True)
    p.add_argument("--total-frac", type=float, default=None)
    p.add_argument("--per-technique-frac", type=float, default=0.05,
                   help="fraction applied to every technique")
    p.add_argument("--technique-frac", action="append", dest="technique_frac",
                   metavar="TECH=FRAC", help="override one technique's fraction")
    p.add_argument("--homoglyph-rate", type=float, default=0.10)
    p.add_argument("--confusables", default=None,
                   help=f"table path (default: ${CONFUSABLES_ENV} or packaged)")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--force", action="store_true",
                   help="allow augmentation for subtasks 2 and 3")

    p = add("assemble", _cmd_assemble, "merge train and dev, dedup")
    p.add_argument("--train", required=True)
    p.add_argument("--dev", required=True)
    p.add_argument("--subtask", required=True, choices=["1", "2", "3"])
    p.add_argument("--out", required=True)

    p = add("sample", _cmd_sample, "draw the validation split")
    p.add_argument("--input", required=True)
    p.add_argument("--subtask", required=True, choices=["1", "2", "3"])
    p.add_argument("--mode", required=True, choices=["binary", "multilabel"])
    p.add_argument("--per-cell", type=int, default=100)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", required=True)

    p = add("score", _cmd_score, "score predictions against gold")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--subtask", required=True, choices=["1", "2", "3"])
    p.add_argument("--out", required=True)

    p = add("delta", _cmd_delta, "per-language deltas against a baseline")
    p.add_argument("--mine", required=True)
    p.add_argument("--baseline", required=True)
    p.add_argument("--out", required=True)

    p = add("percentile", _cmd_percentile, "rank percentile on a leaderboard")
    p.add_argument("--mine", type=float, required=True)
    p.add_argument("--leaderboard", required=True)
    p.add_argument("--out", default=None)

    p = add("lr", None, "train or evaluate the feature classifier")
    lr_sub = p.add_subparsers(dest="lr_command", parser_class=_Parser)
    for name, func in (("train", _cmd_lr_train), ("eval", _cmd_lr_eval)):
        q = lr_sub.add_parser(name)
        q.set_defaults(func=func)
        q.add_argument("--features", required=True)
        q.add_argument("--labels", required=True)
        q.add_argument("--subtask", required=True, choices=["1", "2", "3"])
        q.add_argument("--seed", type=int, default=42)
        q.add_argument("--out", required=True)

    p = add("emit-config", _cmd_emit_config, "write the training hyperparameters")
    p.add_argument("--subtask", required=True, choices=["1", "2", "3"])
    p.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    func = getattr(args, "func", None)
    if func is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        return func(args, argv)
    except core.DataError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
