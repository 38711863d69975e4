"""Corpus and feature file IO.

The corpus format is JSONL with at least `id`, `text`, and `lang` per line;
extra keys are ignored. The feature format written here is JSONL lines of
`{"id", "lang", "values"}`, which downstream classifier tooling consumes.
This package talks to that tooling only through these files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass


class CorpusError(ValueError):
    """A corpus or feature file violates its format."""


@dataclass(frozen=True)
class CorpusRecord:
    id: str
    text: str
    lang: str

    def __post_init__(self):
        if not isinstance(self.id, str) or not self.id:
            raise CorpusError("record id must be a non-empty string")
        if not isinstance(self.text, str) or not self.text.strip():
            raise CorpusError(f"record {self.id!r}: text must be non-empty")
        if not isinstance(self.lang, str) or not self.lang:
            raise CorpusError(f"record {self.id!r}: lang must be a non-empty string")


def read_corpus(path) -> list[CorpusRecord]:
    records = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            where = f"{path}: line {lineno}"
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{where}: {exc}") from None
            if not isinstance(row, dict):
                raise CorpusError(f"{where}: expected a JSON object")
            missing = {"id", "text", "lang"} - set(row)
            if missing:
                raise CorpusError(f"{where}: missing keys {sorted(missing)}")
            try:
                record = CorpusRecord(row["id"], row["text"], row["lang"])
            except CorpusError as exc:
                raise CorpusError(f"{where}: {exc}") from None
            if record.id in seen:
                raise CorpusError(f"{where}: duplicate id {record.id!r}")
            seen.add(record.id)
            records.append(record)
    if not records:
        raise CorpusError(f"{path}: empty corpus")
    return records


def write_features(rows, path) -> None:
    """rows: iterable of (id, lang, vector) with a constant vector length."""
    dim = None
    with open(path, "w", encoding="utf-8") as fh:
        for rid, lang, values in rows:
            values = [float(v) for v in values]
            if dim is None:
                dim = len(values)
            elif len(values) != dim:
                raise CorpusError(
                    f"feature dimension changed from {dim} to {len(values)}")
            fh.write(json.dumps({"id": rid, "lang": lang, "values": values},
                                ensure_ascii=False) + "\n")
