"""Appraisal-side method: weighted MSE+BCE multitask loss with analytic
gradients, and a deterministic per-language logistic-regression classifier
over fixed-dimension feature vectors."""

from __future__ import annotations

import hashlib
import json
import math
import random
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import core
from .score import (PredictionSet, ScoreReport, language_scores_from_rows)

EMOTION_NAMES = ("anger", "disgust", "fear", "sadness", "shame", "joy", "guilt")
APPRAISAL_NAMES = ("consequences to self", "consequences to others",
                   "degree of control", "degree of responsibility",
                   "alignment with social values")
EVENT_NAMES = ("general", "past", "future", "prospective")


@dataclass(frozen=True)
class FeatureVector:
    id: str
    lang: str
    values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if not self.id:
            raise core.ValidationError("feature id must be non-empty")
        if self.lang not in core.LANGUAGES:
            raise core.ValidationError(
                f"feature {self.id!r}: unknown language {self.lang!r}")
        if not self.values:
            raise core.ValidationError(f"feature {self.id!r}: empty vector")
        if not all(math.isfinite(v) for v in self.values):
            raise core.ValidationError(f"feature {self.id!r}: non-finite values")


def read_features(path) -> list[FeatureVector]:
    """Feature file: one `{"id", "lang", "values"}` object per line."""
    out = []
    dim = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            where = f"{path}: line {lineno}"
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise core.ParseError(f"{where}: {exc}") from None
            if not isinstance(row, dict) or not {"id", "lang", "values"} <= row.keys():
                raise core.ParseError(f"{where}: need keys id, lang, values")
            if (not isinstance(row["values"], list)
                    or not all(isinstance(v, (int, float)) for v in row["values"])):
                raise core.ParseError(f"{where}: values must be an array of reals")
            try:
                vec = FeatureVector(row["id"], row["lang"], tuple(row["values"]))
            except core.DataError as exc:
                raise type(exc)(f"{where}: {exc}") from None
            if dim is None:
                dim = len(vec.values)
            elif len(vec.values) != dim:
                raise core.ValidationError(
                    f"{where}: dimension {len(vec.values)} differs from {dim}")
            out.append(vec)
    return out


def write_features(vectors, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for v in vectors:
            fh.write(json.dumps({"id": v.id, "lang": v.lang,
                                 "values": list(v.values)}) + "\n")


@dataclass(frozen=True)
class AppraisalTargets:
    """7 continuous emotion intensities plus 5 appraisal and 4 event bits."""

    emotions: tuple[float, ...]
    appraisals: tuple[int, ...]
    events: tuple[int, ...]

    def __post_init__(self):
        emotions = tuple(float(v) for v in self.emotions)
        appraisals = tuple(int(v) for v in self.appraisals)
        events = tuple(int(v) for v in self.events)
        object.__setattr__(self, "emotions", emotions)
        object.__setattr__(self, "appraisals", appraisals)
        object.__setattr__(self, "events", events)
        if len(emotions) != len(EMOTION_NAMES):
            raise core.ValidationError(
                f"expected {len(EMOTION_NAMES)} emotion values, got {len(emotions)}")
        if not all(math.isfinite(v) and 0 <= v <= 1 for v in emotions):
            raise core.ValidationError("emotion values must lie in [0, 1]")
        if len(appraisals) != len(APPRAISAL_NAMES):
            raise core.ValidationError(
                f"expected {len(APPRAISAL_NAMES)} appraisal bits, got {len(appraisals)}")
        if len(events) != len(EVENT_NAMES):
            raise core.ValidationError(
                f"expected {len(EVENT_NAMES)} event bits, got {len(events)}")
        if any(b not in (0, 1) for b in appraisals + events):
            raise core.ValidationError("appraisal and event values must be 0/1")


class AppraisalPrediction(NamedTuple):
    """Model outputs: emotions as values, the binary heads as logits.
    Also the shape of the gradient returned by multitask_loss."""

    emotions: tuple
    appraisal_logits: tuple
    event_logits: tuple


@dataclass(frozen=True)
class MultitaskLossConfig:
    w_mse: float = 1.0
    w_bce: float = 1.0

    def __post_init__(self):
        if self.w_mse < 0 or self.w_bce < 0:
            raise core.ValidationError("loss weights must be non-negative")
        if self.w_mse + self.w_bce <= 0:
            raise core.ValidationError("at least one loss weight must be positive")


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _bce_from_logits(logits, targets):
    # max(l,0) - l*t + log(1+exp(-|l|)): stable for any logit magnitude.
    return np.maximum(logits, 0.0) - logits * targets + np.log1p(np.exp(-np.abs(logits)))


def multitask_loss(pred: AppraisalPrediction, target: AppraisalTargets,
                   cfg: MultitaskLossConfig = MultitaskLossConfig()):
    """Weighted MSE (emotions) + BCE (appraisal and event heads), each term
    mean-reduced, with the exact analytic gradient.

    Returns (loss, gradient) where the gradient has the shape of pred.
    """
    e = np.asarray(pred.emotions, dtype=np.float64)
    la = np.asarray(pred.appraisal_logits, dtype=np.float64)
    le = np.asarray(pred.event_logits, dtype=np.float64)
    if e.shape != (7,) or la.shape != (5,) or le.shape != (4,):
        raise core.ValidationError("prediction heads must have widths 7, 5, 4")
    for arr in (e, la, le):
        if not np.all(np.isfinite(arr)):
            raise core.ValidationError("non-finite prediction")
    te = np.asarray(target.emotions, dtype=np.float64)
    ta = np.asarray(target.appraisals, dtype=np.float64)
    tv = np.asarray(target.events, dtype=np.float64)

    mse = float(np.mean((e - te) ** 2))
    bce = float(np.mean(_bce_from_logits(la, ta)) + np.mean(_bce_from_logits(le, tv)))
    loss = cfg.w_mse * mse + cfg.w_bce * bce

    grad_e = cfg.w_mse * 2.0 * (e - te) / e.size
    grad_a = cfg.w_bce * (_sigmoid(la) - ta) / la.size
    grad_v = cfg.w_bce * (_sigmoid(le) - tv) / le.size
    return loss, AppraisalPrediction(grad_e, grad_a, grad_v)


@dataclass(frozen=True)
class LRConfig:
    """Deterministic full-batch gradient descent settings.

    The step is halved within an epoch until the proposed update does not
    increase the loss, so recorded epoch losses never increase.
    """

    seed: int = 42
    l2: float = 1.0
    max_epochs: int = 100
    step: float = 1.0
    tol: float = 1e-10


# Saturated logit used for labels that had a single class in training.
_CONSTANT_LOGIT = 30.0


@dataclass
class LRModel:
    """One independent binary classifier per label (one-vs-rest)."""

    weights: np.ndarray  # (labels, dim)
    bias: np.ndarray  # (labels,)
    config: LRConfig
    label_names: tuple[str, ...]
    feature_dim: int
    skipped: tuple[int, ...] = ()
    history: tuple = ()  # per label, the recorded epoch losses

    def schema_hash(self) -> str:
        payload = json.dumps({"labels": list(self.label_names),
                              "dim": self.feature_dim}, sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()


def _lr_loss(X, y, w, b, l2):
    n = X.shape[0]
    z = X @ w + b
    return float(np.mean(_bce_from_logits(z, y)) + l2 * (w @ w) / (2 * n))


def _fit_binary(X, y, cfg: LRConfig):
    n, d = X.shape
    w = np.zeros(d)
    b = 0.0
    loss = _lr_loss(X, y, w, b, cfg.l2)
    losses = [loss]
    for _ in range(cfg.max_epochs):
        p = _sigmoid(X @ w + b)
        gw = X.T @ (p - y) / n + cfg.l2 * w / n
        gb = float(np.mean(p - y))
        step = cfg.step
        w2 = w - step * gw
        b2 = b - step * gb
        new = _lr_loss(X, y, w2, b2, cfg.l2)
        while new > loss and step > 1e-12:
            step /= 2
            w2 = w - step * gw
            b2 = b - step * gb
            new = _lr_loss(X, y, w2, b2, cfg.l2)
        if new > loss:
            break
        w, b = w2, b2
        prev, loss = loss, new
        losses.append(loss)
        if abs(prev - loss) < cfg.tol:
            break
    return w, b, tuple(losses)


def _feature_matrix(features) -> np.ndarray:
    dims = {len(f.values) for f in features}
    if len(dims) != 1:
        raise core.ValidationError(f"mixed feature dimensions: {sorted(dims)}")
    return np.array([f.values for f in features], dtype=np.float64)


def _label_matrix(labels) -> tuple[np.ndarray, tuple[str, ...]]:
    subtasks = {l.subtask_id for l in labels}
    if len(subtasks) != 1:
        raise core.ValidationError(f"mixed label subtasks: {sorted(subtasks)}")
    schema = core.get_schema(subtasks.pop())
    return (np.array([l.bits for l in labels], dtype=np.float64),
            schema.label_names)


def lr_train(features, labels, cfg: LRConfig = LRConfig()) -> LRModel:
    """L2-regularized per-label logistic regression, fit by deterministic
    full-batch gradient descent. Labels with a single class in the data are
    skipped with a warning and predict a saturated constant."""
    if len(features) != len(labels):
        raise core.ValidationError(
            f"{len(features)} features vs {len(labels)} label rows")
    if not features:
        raise core.ValidationError("empty training data")
    X = _feature_matrix(features)
    Y, label_names = _label_matrix(labels)
    n, d = X.shape
    L = Y.shape[1]
    W = np.zeros((L, d))
    B = np.zeros(L)
    skipped = []
    history = []
    for j in range(L):
        y = Y[:, j]
        present = {int(v) for v in y}
        if len(present) < 2:
            warnings.warn(
                f"label {label_names[j]!r} has a single class in training; skipped")
            skipped.append(j)
            B[j] = _CONSTANT_LOGIT if present == {1} else -_CONSTANT_LOGIT
            history.append(())
            continue
        w, b, losses = _fit_binary(X, y, cfg)
        W[j] = w
        B[j] = b
        history.append(losses)
    return LRModel(weights=W, bias=B, config=cfg, label_names=label_names,
                   feature_dim=d, skipped=tuple(skipped), history=tuple(history))


def lr_predict(model: LRModel, features) -> PredictionSet:
    """Per-label probabilities sigmoid(Wx + b); decisions at 0.5."""
    if not features:
        raise core.ValidationError("no features to predict on")
    X = _feature_matrix(features)
    if X.shape[1] != model.feature_dim:
        raise core.ValidationError(
            f"feature dimension {X.shape[1]} does not match model "
            f"dimension {model.feature_dim}")
    probs = _sigmoid(X @ model.weights.T + model.bias)
    scores_by_id = {f.id: tuple(float(p) for p in probs[i])
                    for i, f in enumerate(features)}
    if len(scores_by_id) != len(features):
        raise core.ValidationError("duplicate feature ids in prediction input")
    return PredictionSet.from_scores(scores_by_id, len(model.label_names))


def save_model(model: LRModel, path) -> None:
    payload = {
        "label_names": list(model.label_names),
        "feature_dim": model.feature_dim,
        "weights": model.weights.tolist(),
        "bias": model.bias.tolist(),
        "config": {"seed": model.config.seed, "l2": model.config.l2,
                   "max_epochs": model.config.max_epochs,
                   "step": model.config.step, "tol": model.config.tol},
        "skipped": list(model.skipped),
        "schema_hash": model.schema_hash(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def load_model(path) -> LRModel:
    with open(path, encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise core.ParseError(f"{path}: {exc}") from None
    try:
        model = LRModel(
            weights=np.array(payload["weights"], dtype=np.float64),
            bias=np.array(payload["bias"], dtype=np.float64),
            config=LRConfig(**payload["config"]),
            label_names=tuple(payload["label_names"]),
            feature_dim=int(payload["feature_dim"]),
            skipped=tuple(payload["skipped"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise core.ParseError(f"{path}: bad model file: {exc}") from None
    if model.schema_hash() != payload.get("schema_hash"):
        raise core.SchemaError(
            f"{path}: schema hash mismatch; refusing to predict with this model")
    return model


def split_80_20(features, labels, seed: int = 42):
    """Seeded shuffle, first ceil(0.8 n) pairs to train."""
    if len(features) != len(labels):
        raise core.ValidationError("features and labels must align")
    if not features:
        raise core.ValidationError("cannot split empty data")
    idx = list(range(len(features)))
    random.Random(seed).shuffle(idx)
    cut = math.ceil(0.8 * len(idx))
    train_idx, test_idx = idx[:cut], idx[cut:]
    train = ([features[i] for i in train_idx], [labels[i] for i in train_idx])
    test = ([features[i] for i in test_idx], [labels[i] for i in test_idx])
    return train, test


def _lang_seed(seed: int, lang: str) -> int:
    digest = hashlib.sha256(f"{seed}:{lang}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


MIN_LANGUAGE_SIZE = 10


def evaluate_per_language(features, labels, seed: int = 42) -> ScoreReport:
    """Per language: 80/20 split, train, predict, score on the held-out part.

    Languages with fewer than MIN_LANGUAGE_SIZE examples are skipped with a
    warning. The report has the language-row, label-column shape, with
    macro-F1 and per-label AUC cells.
    """
    if len(features) != len(labels):
        raise core.ValidationError("features and labels must align")
    if not features:
        raise core.ValidationError("no data to evaluate")
    _, label_names = _label_matrix(labels)
    schema = core.get_schema(labels[0].subtask_id)
    by_lang: dict[str, list[int]] = {}
    for i, f in enumerate(features):
        by_lang.setdefault(f.lang, []).append(i)
    per_language = {}
    for lang in sorted(by_lang):
        idx = by_lang[lang]
        if len(idx) < MIN_LANGUAGE_SIZE:
            warnings.warn(
                f"language {lang!r} has only {len(idx)} examples; skipped")
            continue
        f_lang = [features[i] for i in idx]
        y_lang = [labels[i] for i in idx]
        (f_tr, y_tr), (f_te, y_te) = split_80_20(f_lang, y_lang,
                                                 _lang_seed(seed, lang))
        cfg = LRConfig(seed=seed)
        model = lr_train(f_tr, y_tr, cfg)
        preds = lr_predict(model, f_te)
        gold_rows = [l.bits for l in y_te]
        score_rows = [preds.entries[f.id].scores for f in f_te]
        dec_rows = [preds.entries[f.id].decisions for f in f_te]
        per_language[lang] = language_scores_from_rows(
            gold_rows, score_rows, dec_rows, schema)
    if not per_language:
        raise core.ValidationError("every language was below the minimum size")
    return ScoreReport(schema, per_language)
