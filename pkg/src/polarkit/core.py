"""Domain types, label schemas, and line-oriented dataset serialization."""

from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass

LANGUAGES = (
    "amh", "arb", "ben", "deu", "eng", "fas", "hau", "hin", "ita", "khm",
    "mya", "nep", "ori", "pan", "pol", "rus", "spa", "swa", "tel", "tur",
    "urd", "zho",
)

# Languages that are not part of subtask 3.
SUBTASK3_EXCLUDED = frozenset({"ita", "mya", "pol", "rus"})

SPLITS = ("train", "dev", "test")

PROVENANCES = ("original", "anonymized", "lowercased", "uppercased", "homoglyphed")

_LABEL_NAMES = {
    "S1": ("polarization",),
    "S2": ("political", "racial/ethnic", "religious", "gender/sexual", "other"),
    "S3": ("stereotype", "vilification", "dehumanization", "extreme language",
           "lack of empathy", "invalidation"),
}


class DataError(Exception):
    """Base class for all data-level failures (CLI exit code 2)."""


class ParseError(DataError):
    """A line could not be parsed at all."""


class ValidationError(DataError):
    """Parsed data violates an invariant."""


class SchemaError(ValidationError):
    """Data does not fit the declared subtask schema."""


@dataclass(frozen=True)
class SubtaskSchema:
    """One of the three label spaces; label_names is the canonical bit order."""

    subtask_id: str
    label_names: tuple[str, ...]

    def __post_init__(self):
        expected = _LABEL_NAMES.get(self.subtask_id)
        if expected is None:
            raise SchemaError(f"unknown subtask id: {self.subtask_id!r}")
        object.__setattr__(self, "label_names", tuple(self.label_names))
        if self.label_names != expected:
            raise SchemaError(
                f"label names for {self.subtask_id} must be {list(expected)}")

    @property
    def width(self) -> int:
        return len(self.label_names)


def get_schema(subtask: int | str) -> SubtaskSchema:
    """Schema for a subtask given as 1/2/3 or 'S1'/'S2'/'S3'."""
    key = str(subtask).upper()
    if key in ("1", "2", "3"):
        key = "S" + key
    if key not in _LABEL_NAMES:
        raise SchemaError(f"unknown subtask: {subtask!r}")
    return SubtaskSchema(key, _LABEL_NAMES[key])


@dataclass(frozen=True)
class SubtaskLabels:
    """Fixed-width 0/1 vector in the canonical label order of one subtask."""

    subtask_id: str
    bits: tuple[int, ...]

    def __post_init__(self):
        names = _LABEL_NAMES.get(self.subtask_id)
        if names is None:
            raise SchemaError(f"unknown subtask id: {self.subtask_id!r}")
        bits = tuple(int(b) for b in self.bits)
        object.__setattr__(self, "bits", bits)
        if any(b not in (0, 1) for b in bits):
            raise ValidationError(f"labels must be 0/1, got {list(self.bits)}")
        if len(bits) != len(names):
            raise SchemaError(
                f"{self.subtask_id} expects {len(names)} labels, got {len(bits)}")


@dataclass(frozen=True)
class TextRecord:
    """One text with language, split, provenance, and optional labels.

    Text is NFC-normalized at construction so equality downstream (dedup)
    is canonical-form equality. labels=None marks an unlabeled record and
    is never conflated with all-zero labels.
    """

    id: str
    text: str
    lang: str
    labels: SubtaskLabels | None
    split: str
    provenance: str = "original"
    parent_id: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "text", unicodedata.normalize("NFC", self.text))
        if not self.id:
            raise ValidationError("record id must be non-empty")
        if not self.text.strip():
            raise ValidationError(f"record {self.id!r}: text is empty")
        if self.lang not in LANGUAGES:
            raise ValidationError(f"record {self.id!r}: unknown language {self.lang!r}")
        if self.split not in SPLITS:
            raise ValidationError(f"record {self.id!r}: unknown split {self.split!r}")
        if self.provenance not in PROVENANCES:
            raise ValidationError(
                f"record {self.id!r}: unknown provenance {self.provenance!r}")
        if self.provenance != "original" and not self.parent_id:
            raise ValidationError(
                f"record {self.id!r}: derived records must cite a parent id")
        if (self.labels is not None and self.labels.subtask_id == "S3"
                and self.lang in SUBTASK3_EXCLUDED):
            raise ValidationError(
                f"record {self.id!r}: language {self.lang!r} is not part of subtask 3")


def derived_id(parent_id: str, provenance: str) -> str:
    return f"{parent_id}#{provenance}"


@dataclass(frozen=True)
class Dataset:
    """Ordered, immutable collection of records under one schema."""

    records: tuple[TextRecord, ...]
    schema: SubtaskSchema

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        seen = set()
        for r in self.records:
            if r.id in seen:
                raise ValidationError(f"duplicate record id: {r.id!r}")
            seen.add(r.id)
            if r.labels is not None and r.labels.subtask_id != self.schema.subtask_id:
                raise SchemaError(
                    f"record {r.id!r}: labels are for {r.labels.subtask_id}, "
                    f"dataset is {self.schema.subtask_id}")
            if self.schema.subtask_id == "S3" and r.lang in SUBTASK3_EXCLUDED:
                raise ValidationError(
                    f"record {r.id!r}: language {r.lang!r} is not part of subtask 3")

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def by_language(self) -> dict[str, list[TextRecord]]:
        """Records grouped by language, groups and members in dataset order."""
        out: dict[str, list[TextRecord]] = {}
        for r in self.records:
            out.setdefault(r.lang, []).append(r)
        return out


def _record_from_row(row: dict, schema: SubtaskSchema, where: str) -> TextRecord:
    if not isinstance(row, dict):
        raise ParseError(f"{where}: expected an object, got {type(row).__name__}")
    for key in ("id", "text", "lang", "labels", "split", "provenance"):
        if key not in row:
            raise ParseError(f"{where}: missing key {key!r}")
    for key in ("id", "text", "lang", "split", "provenance"):
        if not isinstance(row[key], str):
            raise ParseError(f"{where}: key {key!r} must be a string")
    raw = row["labels"]
    labels = None
    if raw is not None:
        if not isinstance(raw, list) or not all(isinstance(b, int) and not isinstance(b, bool) for b in raw):
            raise ParseError(f"{where}: labels must be null or an array of 0/1 integers")
        if len(raw) != schema.width:
            raise SchemaError(
                f"{where}: expected {schema.width} labels, got {len(raw)}")
        labels = SubtaskLabels(schema.subtask_id, tuple(raw))
    parent = row.get("parent_id")
    if parent is not None and not isinstance(parent, str):
        raise ParseError(f"{where}: parent_id must be a string")
    try:
        return TextRecord(id=row["id"], text=row["text"], lang=row["lang"],
                          labels=labels, split=row["split"],
                          provenance=row["provenance"], parent_id=parent)
    except DataError as exc:
        raise type(exc)(f"{where}: {exc}") from None


def read_dataset(path, schema: SubtaskSchema) -> Dataset:
    """Parse a line-oriented dataset file; line numbers name parse failures."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}: line {lineno}: {exc}") from None
            records.append(_record_from_row(row, schema, f"{path}: line {lineno}"))
    return Dataset(tuple(records), schema)


def record_to_line(r: TextRecord) -> str:
    row = {
        "id": r.id,
        "text": r.text,
        "lang": r.lang,
        "labels": list(r.labels.bits) if r.labels is not None else None,
        "split": r.split,
        "provenance": r.provenance,
    }
    if r.parent_id is not None:
        row["parent_id"] = r.parent_id
    return json.dumps(row, ensure_ascii=False)


def write_dataset(ds: Dataset, path) -> None:
    """Inverse of read_dataset: write-then-read reproduces the dataset."""
    with open(path, "w", encoding="utf-8") as fh:
        for r in ds.records:
            fh.write(record_to_line(r) + "\n")


_BASE_MODELS = {"S1": "Qwen3-32B", "S2": "Gemma-3-27B-pt", "S3": "Gemma-3-27B-pt"}


@dataclass(frozen=True)
class TrainingConfig:
    """Finetuning hyperparameters the toolkit emits (it never trains)."""

    learning_rate: float = 2e-5
    warmup_ratio: float = 0.03
    batch_size: int = 1
    eval_interval_steps: int = 500
    epochs: int = 1
    selection_metric: str = "auc"
    quantization: str = "qlora-4bit"
    base_model: str = "Qwen3-32B"

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "warmup_ratio": self.warmup_ratio,
            "batch_size": self.batch_size,
            "eval_interval_steps": self.eval_interval_steps,
            "epochs": self.epochs,
            "selection_metric": self.selection_metric,
            "quantization": self.quantization,
            "base_model": self.base_model,
        }


def emit_training_config(schema: SubtaskSchema) -> TrainingConfig:
    """Defaults with the checkpoint-selection metric for the subtask.

    AUC selects checkpoints for the binary subtask, macro-F1 for the
    multi-label ones.
    """
    metric = "auc" if schema.subtask_id == "S1" else "macro_f1"
    return TrainingConfig(selection_metric=metric,
                          base_model=_BASE_MODELS[schema.subtask_id])
