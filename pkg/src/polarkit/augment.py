"""Augmentation techniques and the duplicate-transform-deduplicate pipeline."""

from __future__ import annotations

import hashlib
import math
import random
import re
import unicodedata
from dataclasses import dataclass, field
from importlib import resources

from . import core

# Fixed technique order; also the append order in apply_augmentation.
TECHNIQUES = ("anonymized", "lowercased", "uppercased", "homoglyphed")

_EMAIL_RE = re.compile(r"[A-Za-z0-9._%+-]+@[A-Za-z0-9-]+(?:\.[A-Za-z0-9-]+)+")
_MENTION_RE = re.compile(r"(?<!\w)@\w{2,}")
_PHONE_RE = re.compile(r"(?<!\w)\+?\d(?:[\s.()\-]*\d){6,}(?!\w)")


def anonymize(text: str) -> str:
    """Replace emails, user mentions, and phone numbers with fixed tags.

    Emails are replaced before mentions (an email contains '@'), mentions
    before phones. A replacement can unblock a later candidate (in
    "@abc@def" the second handle is shielded by the word character before
    its '@' until the first is tagged), so the passes repeat until nothing
    changes. Each replacement removes an '@' or at least seven digits and
    the tags contain neither, so the loop terminates; the fixed point
    makes the function idempotent.
    """
    while True:
        out = _EMAIL_RE.sub("[EMAIL]", text)
        out = _MENTION_RE.sub("[USER]", out)
        out = _PHONE_RE.sub("[PHONE]", out)
        if out == text:
            return out
        text = out


def to_lowercase(text: str) -> str:
    return text.lower()


def to_uppercase(text: str) -> str:
    return text.upper()


def _script(ch: str) -> str:
    # First token of the Unicode character name ("LATIN", "CYRILLIC", ...).
    return unicodedata.name(ch).split()[0]


@dataclass(frozen=True)
class ConfusablesTable:
    """Single character -> visually similar substitutes from other scripts."""

    entries: dict[str, tuple[str, ...]]

    def __post_init__(self):
        object.__setattr__(
            self, "entries", {k: tuple(v) for k, v in self.entries.items()})
        for source, subs in self.entries.items():
            if len(source) != 1:
                raise core.ValidationError(
                    f"confusables source must be one character, got {source!r}")
            if not subs:
                raise core.ValidationError(
                    f"confusables entry {source!r} has no substitutes")
            for sub in subs:
                if len(sub) != 1:
                    raise core.ValidationError(
                        f"substitute for {source!r} must be one character, got {sub!r}")
                if sub == source:
                    raise core.ValidationError(
                        f"substitute for {source!r} equals its source")
                try:
                    same = _script(source) == _script(sub)
                except ValueError:
                    raise core.ValidationError(
                        f"unnamed character in entry {source!r} -> {sub!r}") from None
                if same:
                    raise core.ValidationError(
                        f"substitute {sub!r} for {source!r} is not cross-script")


def load_confusables(path) -> ConfusablesTable:
    """Parse a table file: one `source<TAB>sub1 sub2 ...` per line, # comments."""
    entries: dict[str, tuple[str, ...]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise core.ParseError(
                    f"{path}: line {lineno}: expected source<TAB>substitutes")
            source, subs = parts[0], tuple(parts[1].split())
            if source in entries:
                raise core.ParseError(
                    f"{path}: line {lineno}: duplicate source {source!r}")
            entries[source] = subs
    return ConfusablesTable(entries)


def default_confusables() -> ConfusablesTable:
    """The packaged Latin/Cyrillic/Greek table."""
    path = resources.files("polarkit").joinpath("data/confusables.tsv")
    with resources.as_file(path) as p:
        return load_confusables(p)


def homoglyphy(text: str, table: ConfusablesTable, rate: float, seed: int) -> str:
    """Seeded per-character substitution from the confusables table.

    Each mappable character is replaced with probability `rate`. If a pass
    over the text replaces nothing, the pass is redrawn from the same
    stream, so any text with a mappable character comes back changed.
    Output length in code points always equals input length.
    """
    if not 0 < rate <= 1:
        raise core.ValidationError(f"homoglyph rate must be in (0, 1], got {rate}")
    positions = [i for i, ch in enumerate(text) if ch in table.entries]
    if not positions:
        return text
    rng = random.Random(seed)
    while True:
        picked = []
        for i in positions:
            if rng.random() < rate:
                picked.append((i, rng.choice(table.entries[text[i]])))
        if picked:
            chars = list(text)
            for i, sub in picked:
                chars[i] = sub
            return "".join(chars)


def dedup_records(records) -> list[core.TextRecord]:
    """Collapse records with identical (NFC) text; see dedup."""
    winner: dict[str, int] = {}
    for idx, r in enumerate(records):
        cur = winner.get(r.text)
        if cur is None:
            winner[r.text] = idx
        elif records[cur].provenance != "original" and r.provenance == "original":
            winner[r.text] = idx
    keep = set(winner.values())
    return [r for i, r in enumerate(records) if i in keep]


def dedup(ds: core.Dataset) -> core.Dataset:
    """Keep one record per distinct text: the first original if any original
    carries that text, otherwise the first occurrence. Input order is kept."""
    return core.Dataset(tuple(dedup_records(ds.records)), ds.schema)


def _default_fractions() -> dict[str, float]:
    return {t: 0.05 for t in TECHNIQUES}


@dataclass(frozen=True)
class AugmentationPlan:
    """How much to augment, per technique, and with what seed."""

    total_fraction: float = 0.20
    per_technique_fraction: dict[str, float] = field(default_factory=_default_fractions)
    seed: int = 42
    homoglyph_char_rate: float = 0.10

    def __post_init__(self):
        object.__setattr__(
            self, "per_technique_fraction", dict(self.per_technique_fraction))
        for tech, frac in self.per_technique_fraction.items():
            if tech not in TECHNIQUES:
                raise core.ValidationError(f"unknown technique {tech!r}")
            if frac < 0:
                raise core.ValidationError(f"fraction for {tech!r} is negative")
        total = sum(self.per_technique_fraction.values())
        if abs(total - self.total_fraction) > 1e-9:
            raise core.ValidationError(
                f"per-technique fractions sum to {total:g}, "
                f"total_fraction is {self.total_fraction:g}")
        if not 0 < self.homoglyph_char_rate <= 1:
            raise core.ValidationError(
                f"homoglyph_char_rate must be in (0, 1], got {self.homoglyph_char_rate}")


def _derived_seed(seed: int, technique: str, key: str) -> int:
    # Stable across processes, unlike hash().
    digest = hashlib.sha256(f"{seed}:{technique}:{key}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def _transform(technique: str, text: str, table: ConfusablesTable,
               rate: float, seed: int) -> str:
    if technique == "anonymized":
        return anonymize(text)
    if technique == "lowercased":
        return to_lowercase(text)
    if technique == "uppercased":
        return to_uppercase(text)
    if technique == "homoglyphed":
        return homoglyphy(text, table, rate, seed)
    raise core.ValidationError(f"unknown technique {technique!r}")


def augment_candidates(ds: core.Dataset, plan: AugmentationPlan,
                       table: ConfusablesTable) -> dict[str, list[core.TextRecord]]:
    """Derived records per technique, before deduplication.

    For each technique, ceil(fraction * N) source records are drawn without
    replacement from the whole dataset; draws are independent across
    techniques, so one source may feed several.
    """
    for r in ds.records:
        if r.split == "test":
            raise core.ValidationError(
                f"record {r.id!r}: augmentation input may not contain test records")
    n = len(ds.records)
    out: dict[str, list[core.TextRecord]] = {}
    for technique in TECHNIQUES:
        frac = plan.per_technique_fraction.get(technique)
        if frac is None:
            continue
        k = min(n, math.ceil(frac * n))
        rng = random.Random(_derived_seed(plan.seed, technique, "sample"))
        chosen = sorted(rng.sample(range(n), k))
        derived = []
        for idx in chosen:
            parent = ds.records[idx]
            text = _transform(technique, parent.text, table, plan.homoglyph_char_rate,
                              _derived_seed(plan.seed, technique, parent.id))
            derived.append(core.TextRecord(
                id=core.derived_id(parent.id, technique), text=text,
                lang=parent.lang, labels=parent.labels, split=parent.split,
                provenance=technique, parent_id=parent.id))
        out[technique] = derived
    return out


def apply_augmentation(ds: core.Dataset, plan: AugmentationPlan,
                       table: ConfusablesTable) -> core.Dataset:
    """Append the per-technique candidates, then deduplicate.

    Derived records keep their parent's labels; transforms that change
    nothing (a caseless script, a text with no confusable characters) die
    in dedup, which is what keeps the output size below N + sum of slices.
    """
    candidates = augment_candidates(ds, plan, table)
    records = list(ds.records)
    for technique in TECHNIQUES:
        records.extend(candidates.get(technique, ()))
    return core.Dataset(tuple(dedup_records(records)), ds.schema)
