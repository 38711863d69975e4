"""Dataset assembly: merge with dedup, and seeded validation sampling."""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from . import core
from .augment import dedup_records

VALIDATION_MODES = ("per_language_per_label", "per_language_distributional")


@dataclass(frozen=True)
class ValidationPlan:
    """How validation records are drawn: per-cell balanced (binary subtask)
    or per-language distribution-preserving (multi-label subtasks)."""

    mode: str
    per_cell_count: int = 100
    seed: int = 42

    def __post_init__(self):
        if self.mode not in VALIDATION_MODES:
            raise core.ValidationError(f"unknown sampling mode {self.mode!r}")
        if self.per_cell_count < 1:
            raise core.ValidationError(
                f"per_cell_count must be >= 1, got {self.per_cell_count}")


class SplitResult(NamedTuple):
    validation: core.Dataset
    train_rest: core.Dataset
    # (lang, label value or None, available) for every undersized cell.
    shortfalls: tuple


def merge_and_dedup(train: core.Dataset, dev: core.Dataset) -> core.Dataset:
    """Concatenate train then dev, then collapse duplicate texts."""
    if train.schema.subtask_id != dev.schema.subtask_id:
        raise core.SchemaError(
            f"cannot merge {train.schema.subtask_id} with {dev.schema.subtask_id}")
    merged = list(train.records) + list(dev.records)
    return core.Dataset(tuple(dedup_records(merged)), train.schema)


def _cell_seed(seed: int, lang: str, key) -> int:
    digest = hashlib.sha256(f"{seed}:{lang}:{key}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def _require_labeled(ds: core.Dataset) -> None:
    for r in ds.records:
        if r.labels is None:
            raise core.ValidationError(
                f"record {r.id!r}: validation sampling needs labeled records")


def _split_by_selection(ds: core.Dataset, selected: set) -> tuple[core.Dataset, core.Dataset]:
    validation = [replace(r, split="dev") for i, r in enumerate(ds.records) if i in selected]
    rest = [replace(r, split="train") for i, r in enumerate(ds.records) if i not in selected]
    return (core.Dataset(tuple(validation), ds.schema),
            core.Dataset(tuple(rest), ds.schema))


def sample_validation_binary(ds: core.Dataset, plan: ValidationPlan) -> SplitResult:
    """Draw up to per_cell_count records for every (language, label) cell.

    An empty cell is a hard error (that language could not be scored);
    an undersized cell contributes what it has and is reported.
    """
    if ds.schema.subtask_id != "S1":
        raise core.SchemaError("per-cell sampling is defined for subtask 1 only")
    if plan.mode != "per_language_per_label":
        raise core.ValidationError(
            f"plan mode {plan.mode!r} does not match binary sampling")
    _require_labeled(ds)
    by_lang: dict[str, list[int]] = {}
    for i, r in enumerate(ds.records):
        by_lang.setdefault(r.lang, []).append(i)
    selected: set[int] = set()
    shortfalls = []
    for lang in sorted(by_lang):
        for value in (0, 1):
            cell = [i for i in by_lang[lang]
                    if ds.records[i].labels.bits[0] == value]
            if not cell:
                raise core.ValidationError(
                    f"no records available for cell (lang={lang}, label={value})")
            k = min(plan.per_cell_count, len(cell))
            if k < plan.per_cell_count:
                shortfalls.append((lang, value, len(cell)))
            rng = random.Random(_cell_seed(plan.seed, lang, value))
            selected.update(rng.sample(cell, k))
    validation, rest = _split_by_selection(ds, selected)
    return SplitResult(validation, rest, tuple(shortfalls))


def sample_validation_multilabel(ds: core.Dataset, plan: ValidationPlan) -> SplitResult:
    """Per language, draw min(per_cell_count, available) records whose label
    marginals track the pool's marginal frequencies.

    Selection is greedy: each step takes the record that minimizes the
    summed absolute distance between running label counts and the rounded
    targets, ties resolved by a seeded shuffle order.
    """
    if ds.schema.subtask_id not in ("S2", "S3"):
        raise core.SchemaError(
            "distribution-preserving sampling is defined for subtasks 2 and 3")
    if plan.mode != "per_language_distributional":
        raise core.ValidationError(
            f"plan mode {plan.mode!r} does not match multilabel sampling")
    _require_labeled(ds)
    by_lang: dict[str, list[int]] = {}
    for i, r in enumerate(ds.records):
        by_lang.setdefault(r.lang, []).append(i)
    selected: set[int] = set()
    shortfalls = []
    for lang in sorted(by_lang):
        pool = by_lang[lang]
        m = len(pool)
        n = min(plan.per_cell_count, m)
        if m <= plan.per_cell_count:
            selected.update(pool)
            if m < plan.per_cell_count:
                shortfalls.append((lang, None, m))
            continue
        bits = np.array([ds.records[i].labels.bits for i in pool], dtype=np.float64)
        targets = np.floor(n * bits.mean(axis=0) + 0.5)
        rng = random.Random(_cell_seed(plan.seed, lang, "multilabel"))
        order = list(range(m))
        rng.shuffle(order)
        shuffled = bits[order]
        counts = np.zeros(bits.shape[1])
        taken = np.zeros(m, dtype=bool)
        for _ in range(n):
            # Cost of a candidate: total marginal deficit after taking it.
            cost = np.abs((targets - counts)[None, :] - shuffled).sum(axis=1)
            cost[taken] = np.inf
            pick = int(np.argmin(cost))
            taken[pick] = True
            counts += shuffled[pick]
        # The forward pass can paint itself into a corner near the end, so
        # swap taken/untaken pairs while a swap strictly lowers the summed
        # absolute deviation from the targets. Deviations are integers, so
        # this terminates; argmin keeps the tie-break on shuffle order.
        dev = counts - targets
        while np.abs(dev).sum() > 0:
            t_idx = np.flatnonzero(taken)
            u_idx = np.flatnonzero(~taken)
            after = (dev[None, :] - shuffled[t_idx])[:, None, :] + shuffled[u_idx][None, :, :]
            l1 = np.abs(after).sum(axis=2)
            best = np.unravel_index(int(np.argmin(l1)), l1.shape)
            if l1[best] >= np.abs(dev).sum():
                break
            out_i, in_j = int(t_idx[best[0]]), int(u_idx[best[1]])
            taken[out_i] = False
            taken[in_j] = True
            dev = dev - shuffled[out_i] + shuffled[in_j]
        selected.update(pool[order[j]] for j in np.flatnonzero(taken))
    validation, rest = _split_by_selection(ds, selected)
    return SplitResult(validation, rest, tuple(shortfalls))


def write_split_manifest(result: SplitResult, path) -> None:
    """One `id<TAB>assignment` line per record, validation block first."""
    with open(path, "w", encoding="utf-8") as fh:
        for r in result.validation.records:
            fh.write(f"{r.id}\tvalidation\n")
        for r in result.train_rest.records:
            fh.write(f"{r.id}\ttrain\n")
