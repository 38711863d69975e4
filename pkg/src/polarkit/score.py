"""Shared-task scoring: per-class F1, macro-F1, ROC-AUC, baseline deltas,
and leaderboard rank percentile."""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass
from typing import NamedTuple

from . import core


class UndefinedAucError(core.ValidationError):
    """AUC asked for a label whose gold column has a single class."""


def f1(tp: int, fp: int, fn: int) -> float:
    """2tp / (2tp + fp + fn); 0.0 when the denominator is 0."""
    if min(tp, fp, fn) < 0:
        raise core.ValidationError("confusion counts must be non-negative")
    denom = 2 * tp + fp + fn
    return 0.0 if denom == 0 else 2 * tp / denom


def roc_auc(scores, gold_bits) -> float:
    """Probability a random positive outranks a random negative, ties 0.5.

    Computed from rank sums; equals the exhaustive pairwise count.
    """
    scores = list(scores)
    gold = [int(b) for b in gold_bits]
    if len(scores) != len(gold):
        raise core.ValidationError("scores and gold have different lengths")
    if any(b not in (0, 1) for b in gold):
        raise core.ValidationError("gold values must be 0/1")
    n = len(scores)
    pos = sum(gold)
    neg = n - pos
    if pos == 0 or neg == 0:
        raise UndefinedAucError("AUC is undefined with a single gold class")
    order = sorted(range(n), key=lambda i: scores[i])
    ranks = [0.0] * n
    i = 0
    while i < n:
        j = i
        while j + 1 < n and scores[order[j + 1]] == scores[order[i]]:
            j += 1
        avg = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    rank_sum = sum(ranks[i] for i in range(n) if gold[i] == 1)
    return (rank_sum - pos * (pos + 1) / 2) / (pos * neg)


def rank_percentile(my_score: float, all_scores) -> float:
    """Percent of systems scoring strictly worse; ties are not worse."""
    all_scores = list(all_scores)
    if my_score not in all_scores:
        raise core.ValidationError("my_score must be one of all_scores")
    worse = sum(1 for s in all_scores if s < my_score)
    return 100.0 * worse / len(all_scores)


class Prediction(NamedTuple):
    scores: tuple[float, ...]
    decisions: tuple[int, ...]


DECISION_THRESHOLD = 0.5


def decide(scores) -> tuple[int, ...]:
    return tuple(1 if s >= DECISION_THRESHOLD else 0 for s in scores)


@dataclass(frozen=True)
class PredictionSet:
    """Per-record label scores in [0,1] plus 0/1 decisions."""

    entries: dict[str, Prediction]
    width: int

    def __post_init__(self):
        object.__setattr__(self, "entries", dict(self.entries))
        for rid, pred in self.entries.items():
            if len(pred.scores) != self.width or len(pred.decisions) != self.width:
                raise core.SchemaError(
                    f"prediction {rid!r}: expected width {self.width}")
            if any(not 0 <= s <= 1 for s in pred.scores):
                raise core.ValidationError(
                    f"prediction {rid!r}: scores must lie in [0, 1]")
            if any(d not in (0, 1) for d in pred.decisions):
                raise core.ValidationError(
                    f"prediction {rid!r}: decisions must be 0/1")

    @classmethod
    def from_scores(cls, scores_by_id: dict, width: int,
                    decisions_by_id: dict | None = None) -> "PredictionSet":
        entries = {}
        for rid, scores in scores_by_id.items():
            scores = tuple(float(s) for s in scores)
            if decisions_by_id is not None and rid in decisions_by_id:
                dec = tuple(int(d) for d in decisions_by_id[rid])
            else:
                dec = decide(scores)
            entries[rid] = Prediction(scores, dec)
        return cls(entries, width)


def read_predictions(path, schema: core.SubtaskSchema) -> PredictionSet:
    """Prediction file: the record line format with `scores` (and optionally
    explicit `decisions`) in place of `labels`."""
    scores_by_id: dict[str, tuple] = {}
    decisions_by_id: dict[str, tuple] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            where = f"{path}: line {lineno}"
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise core.ParseError(f"{where}: {exc}") from None
            if not isinstance(row, dict) or "id" not in row or "scores" not in row:
                raise core.ParseError(f"{where}: need keys 'id' and 'scores'")
            rid = row["id"]
            if rid in scores_by_id:
                raise core.ValidationError(f"{where}: duplicate prediction id {rid!r}")
            scores = row["scores"]
            if (not isinstance(scores, list)
                    or not all(isinstance(s, (int, float)) for s in scores)):
                raise core.ParseError(f"{where}: scores must be an array of reals")
            if len(scores) != schema.width:
                raise core.SchemaError(
                    f"{where}: expected {schema.width} scores, got {len(scores)}")
            scores_by_id[rid] = tuple(float(s) for s in scores)
            if "decisions" in row and row["decisions"] is not None:
                dec = row["decisions"]
                if not isinstance(dec, list) or len(dec) != schema.width:
                    raise core.SchemaError(f"{where}: bad decisions array")
                decisions_by_id[rid] = tuple(int(d) for d in dec)
    try:
        return PredictionSet.from_scores(scores_by_id, schema.width, decisions_by_id)
    except core.DataError as exc:
        raise type(exc)(f"{path}: {exc}") from None


@dataclass(frozen=True)
class LanguageScores:
    macro_f1: float
    per_label_f1: tuple[float, ...]
    per_label_auc: tuple  # float or None where AUC is undefined
    support: tuple[int, ...]  # gold positives per label
    n: int


@dataclass(frozen=True)
class ScoreReport:
    """Languages as rows, labels as columns."""

    schema: core.SubtaskSchema
    per_language: dict[str, LanguageScores]

    def __post_init__(self):
        object.__setattr__(self, "per_language", dict(self.per_language))

    def macro_by_language(self) -> dict[str, float]:
        return {lang: ls.macro_f1 for lang, ls in self.per_language.items()}


def _label_confusion(gold_rows, dec_rows, j, positive=1):
    tp = fp = fn = 0
    for g, d in zip(gold_rows, dec_rows):
        g_pos = g[j] == positive
        d_pos = d[j] == positive
        if g_pos and d_pos:
            tp += 1
        elif d_pos:
            fp += 1
        elif g_pos:
            fn += 1
    return tp, fp, fn


def per_label_f1s(gold_rows, dec_rows, schema: core.SubtaskSchema) -> tuple[float, ...]:
    """Per rendered label column. For the binary subtask the single column
    is the mean of the two class F1s (polarized and non-polarized each
    scored as the positive class), which is what the macro average is."""
    if schema.subtask_id == "S1":
        f_pos = f1(*_label_confusion(gold_rows, dec_rows, 0, positive=1))
        f_neg = f1(*_label_confusion(gold_rows, dec_rows, 0, positive=0))
        return ((f_pos + f_neg) / 2,)
    return tuple(f1(*_label_confusion(gold_rows, dec_rows, j))
                 for j in range(schema.width))


def macro_from_rows(gold_rows, dec_rows, schema: core.SubtaskSchema) -> float:
    per_label = per_label_f1s(gold_rows, dec_rows, schema)
    return sum(per_label) / len(per_label)


def language_scores_from_rows(gold_rows, score_rows, dec_rows,
                              schema: core.SubtaskSchema) -> LanguageScores:
    per_label = per_label_f1s(gold_rows, dec_rows, schema)
    aucs = []
    for j in range(schema.width):
        col_scores = [s[j] for s in score_rows]
        col_gold = [g[j] for g in gold_rows]
        try:
            aucs.append(roc_auc(col_scores, col_gold))
        except UndefinedAucError:
            warnings.warn(
                f"AUC undefined for label {schema.label_names[j]!r} "
                "(single gold class); skipped")
            aucs.append(None)
    support = tuple(sum(g[j] for g in gold_rows) for j in range(schema.width))
    return LanguageScores(macro_f1=sum(per_label) / len(per_label),
                          per_label_f1=per_label, per_label_auc=tuple(aucs),
                          support=support, n=len(gold_rows))


def _aligned_rows(preds: PredictionSet, gold: core.Dataset, lang: str):
    gold_rows, score_rows, dec_rows = [], [], []
    for r in gold.records:
        if r.lang != lang:
            continue
        if r.labels is None:
            raise core.ValidationError(f"gold record {r.id!r} is unlabeled")
        entry = preds.entries.get(r.id)
        if entry is None:
            raise core.ValidationError(f"missing prediction for record {r.id!r}")
        gold_rows.append(r.labels.bits)
        score_rows.append(entry.scores)
        dec_rows.append(entry.decisions)
    return gold_rows, score_rows, dec_rows


def macro_f1(preds: PredictionSet, gold: core.Dataset, lang: str) -> float:
    """Mean over label columns of per-class F1 for one language."""
    gold_rows, _, dec_rows = _aligned_rows(preds, gold, lang)
    if not gold_rows:
        raise core.ValidationError(f"no gold records for language {lang!r}")
    return macro_from_rows(gold_rows, dec_rows, gold.schema)


def per_language_report(preds: PredictionSet, gold: core.Dataset) -> ScoreReport:
    if preds.width != gold.schema.width:
        raise core.SchemaError(
            f"prediction width {preds.width} does not match schema "
            f"width {gold.schema.width}")
    per_language = {}
    for lang in sorted(gold.by_language()):
        gold_rows, score_rows, dec_rows = _aligned_rows(preds, gold, lang)
        per_language[lang] = language_scores_from_rows(
            gold_rows, score_rows, dec_rows, gold.schema)
    return ScoreReport(gold.schema, per_language)


@dataclass(frozen=True)
class DeltaTable:
    per_language: dict[str, float]
    average: float


def baseline_delta(mine, baseline) -> DeltaTable:
    """Cellwise mine - baseline over per-language macro-F1; the Average row
    is the mean over the languages present."""
    mine_map = mine.macro_by_language() if isinstance(mine, ScoreReport) else dict(mine)
    base_map = (baseline.macro_by_language()
                if isinstance(baseline, ScoreReport) else dict(baseline))
    if set(mine_map) != set(base_map):
        raise core.ValidationError(
            "language sets differ: "
            f"{sorted(set(mine_map) ^ set(base_map))}")
    if not mine_map:
        raise core.ValidationError("empty reports")
    deltas = {lang: mine_map[lang] - base_map[lang] for lang in sorted(mine_map)}
    average = sum(deltas.values()) / len(deltas)
    return DeltaTable(deltas, average)


def _cell(value) -> str:
    return "" if value is None else f"{value:.4f}"


def report_to_csv(report: ScoreReport, path) -> None:
    """Rows (language, label); cells rounded to 4 decimals for rendering."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["language", "label", "f1", "auc", "support"])
        for lang in sorted(report.per_language):
            ls = report.per_language[lang]
            for j, name in enumerate(report.schema.label_names):
                writer.writerow([lang, name, _cell(ls.per_label_f1[j]),
                                 _cell(ls.per_label_auc[j]), ls.support[j]])


def summary_to_csv(report: ScoreReport, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["language", "macro_f1"])
        for lang in sorted(report.per_language):
            writer.writerow([lang, _cell(report.per_language[lang].macro_f1)])


def read_summary_csv(path) -> dict[str, float]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["language", "macro_f1"]:
            raise core.ParseError(f"{path}: expected header language,macro_f1")
        out = {}
        for lineno, row in enumerate(reader, 2):
            if not row:
                continue
            if len(row) != 2:
                raise core.ParseError(f"{path}: line {lineno}: expected 2 columns")
            lang, value = row
            if lang == "Average":
                continue
            if lang in out:
                raise core.ValidationError(
                    f"{path}: line {lineno}: duplicate language {lang!r}")
            try:
                out[lang] = float(value)
            except ValueError:
                raise core.ParseError(
                    f"{path}: line {lineno}: bad number {value!r}") from None
        return out


def delta_to_csv(delta: DeltaTable, path) -> None:
    """Per-language deltas with a terminal Average row."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["language", "delta"])
        for lang in sorted(delta.per_language):
            writer.writerow([lang, _cell(delta.per_language[lang])])
        writer.writerow(["Average", _cell(delta.average)])


def read_leaderboard(path) -> list[float]:
    """One numeric score per line; # comments and blank lines allowed."""
    scores = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            try:
                scores.append(float(line))
            except ValueError:
                raise core.ParseError(
                    f"{path}: line {lineno}: bad score {line!r}") from None
    if not scores:
        raise core.ValidationError(f"{path}: leaderboard is empty")
    return scores
