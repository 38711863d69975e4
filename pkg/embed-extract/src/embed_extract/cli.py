"""Command line entry point.

Exit codes: 0 success, 1 usage error, 2 data or model error. Outputs go
inside --out: features.jsonl plus run_log.json with the extraction counts.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .extract import POOLING_MODES, ExtractorConfig, extract_features, load_encoder
from .io import CorpusError, read_corpus, write_features


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; the contract here is 1.
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def build_parser() -> _Parser:
    parser = _Parser(prog="embed-extract",
                     description="Encode a JSONL corpus into sentence "
                                 "embedding feature vectors.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--input", required=True, help="corpus JSONL path")
    parser.add_argument("--model", required=True,
                        help="encoder name or local model directory")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--pooling", choices=POOLING_MODES, default="mean")
    parser.add_argument("--batch-size", type=int, default=16)
    parser.add_argument("--max-length", type=int, default=128)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        config = ExtractorConfig(model=args.model, pooling=args.pooling,
                                 batch_size=args.batch_size,
                                 max_length=args.max_length)
    except ValueError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1

    try:
        records = read_corpus(args.input)
    except (CorpusError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2

    try:
        tokenizer, model = load_encoder(config)
    except Exception as exc:
        sys.stderr.write(f"error: failed to load model {args.model!r}: {exc}\n")
        return 2

    rows, stats = extract_features(records, config, tokenizer, model)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        write_features(rows, out / "features.jsonl")
    except (CorpusError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    run_log = {
        "input": str(args.input),
        "model": args.model,
        "pooling": config.pooling,
        "batch_size": config.batch_size,
        "max_length": config.max_length,
        "records": stats.records,
        "unique_texts": stats.unique_texts,
        "truncated": stats.truncated,
        "dimension": len(rows[0][2]),
        "version": __version__,
    }
    with open(out / "run_log.json", "w", encoding="utf-8") as fh:
        json.dump(run_log, fh, indent=2)
        fh.write("\n")
    if stats.truncated:
        sys.stderr.write(
            f"truncated {stats.truncated} of {stats.records} records "
            f"to {config.max_length} tokens\n")
    print(f"{stats.records} records -> {len(rows[0][2])}-dimensional vectors")
    return 0


if __name__ == "__main__":
    sys.exit(main())
