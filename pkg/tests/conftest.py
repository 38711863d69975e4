"""Shared builders for the test suite."""

import random

from polarkit import core

# Character pools spanning cased Latin, Cyrillic, Greek, plus caseless and
# bicameral-free scripts, digits, and punctuation the anonymizer cares about.
ALPHABETS = (
    "abcdefghijklmnopqrstuvwxyz",
    "ABCDEFGHIJKLMNOPQRSTUVWXYZ",
    "абвгдежзиклмнопрстуфхцчшщэюя",
    "АБВГДЕЖЗИКЛМНОП",
    "αβγδεζηθικλμνξοπρστυφχψω",
    "ابتثجحخدذرزسشصضطظ",
    "אבגדהוזחטיכלמן",
    "अआइईउऊएऐओऔकखगघ",
    "ঀঁংঃঅআইঈউঊঋ",
    "漢字中文字符測試句子",
    "ひらがなカタカナ",
    "ሀለሐመሠረሰሸቀበ",
    "ကခဂဃငစဆဇ",
    " עברית",
    "0123456789",
    " \t.,!?@#()-+[]:;'\"/",
)


def random_text(rng: random.Random, min_len: int = 1, max_len: int = 60) -> str:
    n = rng.randint(min_len, max_len)
    chars = [rng.choice(rng.choice(ALPHABETS)) for _ in range(n)]
    # Keep at least one non-space character so records stay valid.
    chars.append(rng.choice("abcxyz"))
    return "".join(chars)


def s1_labels(bit: int) -> core.SubtaskLabels:
    return core.SubtaskLabels("S1", (bit,))


def make_record(rid, text, lang="eng", bits=None, subtask="S1", split="train",
                provenance="original", parent_id=None) -> core.TextRecord:
    labels = None if bits is None else core.SubtaskLabels(subtask, tuple(bits))
    return core.TextRecord(id=str(rid), text=text, lang=lang, labels=labels,
                           split=split, provenance=provenance, parent_id=parent_id)


def make_s1_dataset(langs, pos_per_lang, neg_per_lang, split="train",
                    seed=0) -> core.Dataset:
    """Unique-texted binary dataset with the given per-language class counts."""
    rng = random.Random(seed)
    records = []
    for lang in langs:
        for i in range(pos_per_lang):
            records.append(make_record(
                f"{lang}-p{i}", f"{lang} positive text {i} {rng.random():.6f}",
                lang=lang, bits=(1,), split=split))
        for i in range(neg_per_lang):
            records.append(make_record(
                f"{lang}-n{i}", f"{lang} negative text {i} {rng.random():.6f}",
                lang=lang, bits=(0,), split=split))
    return core.Dataset(tuple(records), core.get_schema(1))


def make_multilabel_dataset(lang, n, subtask="S2", seed=0, label_probs=None,
                            split="train") -> core.Dataset:
    """One-language multi-label dataset with independent per-label draws."""
    schema = core.get_schema(subtask)
    rng = random.Random(seed)
    probs = label_probs or [0.5] * schema.width
    records = []
    for i in range(n):
        bits = tuple(1 if rng.random() < p else 0 for p in probs)
        records.append(make_record(f"{lang}-{i}", f"{lang} text number {i}",
                                   lang=lang, bits=bits, subtask=schema.subtask_id,
                                   split=split))
    return core.Dataset(tuple(records), schema)
