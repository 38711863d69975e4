"""Tests for the multitask loss, the from-scratch logistic regression, and
per-language evaluation over feature vectors."""

from __future__ import annotations

import json
import math
import random
import warnings

import numpy as np
import pytest

from polarkit.appraisal import (
    APPRAISAL_NAMES,
    EMOTION_NAMES,
    EVENT_NAMES,
    AppraisalPrediction,
    AppraisalTargets,
    FeatureVector,
    LRConfig,
    LRModel,
    MultitaskLossConfig,
    evaluate_per_language,
    load_model,
    lr_predict,
    lr_train,
    multitask_loss,
    read_features,
    save_model,
    split_80_20,
    write_features,
)
from polarkit.core import (
    ParseError,
    SchemaError,
    SubtaskLabels,
    ValidationError,
)
from polarkit.score import roc_auc


def random_prediction(rng):
    return AppraisalPrediction(
        tuple(rng.uniform(-0.5, 1.5) for _ in range(7)),
        tuple(rng.uniform(-4.0, 4.0) for _ in range(5)),
        tuple(rng.uniform(-4.0, 4.0) for _ in range(4)),
    )


def random_targets(rng):
    return AppraisalTargets(
        tuple(rng.random() for _ in range(7)),
        tuple(rng.randint(0, 1) for _ in range(5)),
        tuple(rng.randint(0, 1) for _ in range(4)),
    )


def flatten_prediction(pred):
    return np.concatenate(
        [
            np.asarray(pred.emotions, dtype=np.float64),
            np.asarray(pred.appraisal_logits, dtype=np.float64),
            np.asarray(pred.event_logits, dtype=np.float64),
        ]
    )


def unflatten_prediction(vec):
    return AppraisalPrediction(
        tuple(vec[:7]), tuple(vec[7:12]), tuple(vec[12:16])
    )


# ---------------------------------------------------------------------------
# loss values
# ---------------------------------------------------------------------------


def test_head_name_widths():
    assert len(EMOTION_NAMES) == 7
    assert len(APPRAISAL_NAMES) == 5
    assert len(EVENT_NAMES) == 4


def test_loss_zero_at_perfect_prediction():
    target = AppraisalTargets(
        (0.1, 0.9, 0.0, 1.0, 0.5, 0.3, 0.7), (1, 0, 1, 0, 1), (0, 1, 0, 1)
    )
    pred = AppraisalPrediction(
        target.emotions,
        tuple(30.0 if b else -30.0 for b in target.appraisals),
        tuple(30.0 if b else -30.0 for b in target.events),
    )
    loss, _ = multitask_loss(pred, target)
    assert loss < 1e-9


def test_loss_mse_only_constant_error():
    target = AppraisalTargets((1.0,) * 7, (0,) * 5, (0,) * 4)
    pred = AppraisalPrediction((0.0,) * 7, (0.0,) * 5, (0.0,) * 4)
    loss, _ = multitask_loss(pred, target, MultitaskLossConfig(w_mse=1.0, w_bce=0.0))
    assert loss == 1.0


def test_loss_bce_only_zero_logits():
    target = AppraisalTargets((0.0,) * 7, (1, 0, 1, 0, 1), (0, 1, 0, 1))
    pred = AppraisalPrediction((0.5,) * 7, (0.0,) * 5, (0.0,) * 4)
    loss, _ = multitask_loss(pred, target, MultitaskLossConfig(w_mse=0.0, w_bce=1.0))
    assert loss == pytest.approx(2 * math.log(2))


def test_loss_is_weighted_sum_of_parts():
    rng = random.Random(21)
    pred = random_prediction(rng)
    target = random_targets(rng)
    mse_part, _ = multitask_loss(pred, target, MultitaskLossConfig(1.0, 0.0))
    bce_part, _ = multitask_loss(pred, target, MultitaskLossConfig(0.0, 1.0))
    combined, _ = multitask_loss(pred, target, MultitaskLossConfig(2.0, 3.0))
    assert combined == pytest.approx(2.0 * mse_part + 3.0 * bce_part)


def test_loss_nonnegative_on_random_inputs():
    rng = random.Random(22)
    for _ in range(200):
        loss, _ = multitask_loss(random_prediction(rng), random_targets(rng))
        assert loss >= 0.0


def test_loss_stable_at_extreme_logits():
    target = AppraisalTargets((0.5,) * 7, (1, 0, 1, 0, 1), (0, 1, 0, 1))
    pred = AppraisalPrediction((0.5,) * 7, (500.0, -500.0, 500.0, -500.0, 500.0),
                               (-500.0, 500.0, -500.0, 500.0))
    loss, grad = multitask_loss(pred, target)
    assert math.isfinite(loss)
    assert loss < 1e-9
    assert np.all(np.isfinite(flatten_prediction(grad)))


def test_loss_rejects_wrong_widths():
    target = random_targets(random.Random(1))
    bad = AppraisalPrediction((0.0,) * 6, (0.0,) * 5, (0.0,) * 4)
    with pytest.raises(ValidationError):
        multitask_loss(bad, target)


def test_loss_rejects_non_finite_input():
    target = random_targets(random.Random(2))
    bad = AppraisalPrediction((float("nan"),) * 7, (0.0,) * 5, (0.0,) * 4)
    with pytest.raises(ValidationError):
        multitask_loss(bad, target)


def test_loss_config_validation():
    with pytest.raises(ValidationError):
        MultitaskLossConfig(w_mse=-0.1)
    with pytest.raises(ValidationError):
        MultitaskLossConfig(w_mse=0.0, w_bce=0.0)
    MultitaskLossConfig(w_mse=0.0, w_bce=2.0)  # one-sided is fine


# ---------------------------------------------------------------------------
# gradients
# ---------------------------------------------------------------------------


def test_emotion_gradient_closed_form():
    target = AppraisalTargets((1.0,) * 7, (0,) * 5, (0,) * 4)
    pred = AppraisalPrediction((0.0,) * 7, (0.0,) * 5, (0.0,) * 4)
    _, grad = multitask_loss(pred, target, MultitaskLossConfig(1.0, 0.0))
    assert np.allclose(np.asarray(grad.emotions), -2.0 / 7)
    assert np.allclose(np.asarray(grad.appraisal_logits), 0.0)
    assert np.allclose(np.asarray(grad.event_logits), 0.0)


def test_logit_gradient_closed_form_at_zero():
    # sigmoid(0) = 0.5, so each appraisal component contributes
    # (0.5 - t) / 5 and each event component (0.5 - t) / 4.
    target = AppraisalTargets((0.0,) * 7, (1, 0, 1, 0, 1), (0, 1, 0, 1))
    pred = AppraisalPrediction((0.0,) * 7, (0.0,) * 5, (0.0,) * 4)
    _, grad = multitask_loss(pred, target, MultitaskLossConfig(0.0, 1.0))
    expected_a = (np.array([0.5, 0.5, 0.5, 0.5, 0.5]) - np.array(target.appraisals)) / 5
    expected_e = (np.array([0.5, 0.5, 0.5, 0.5]) - np.array(target.events)) / 4
    assert np.allclose(np.asarray(grad.appraisal_logits), expected_a)
    assert np.allclose(np.asarray(grad.event_logits), expected_e)


def test_gradient_matches_central_finite_differences():
    rng = random.Random(1337)
    h = 1e-5
    for _ in range(100):
        pred = random_prediction(rng)
        target = random_targets(rng)
        cfg = MultitaskLossConfig(rng.uniform(0.1, 2.0), rng.uniform(0.1, 2.0))
        _, grad = multitask_loss(pred, target, cfg)
        analytic = flatten_prediction(grad)
        x0 = flatten_prediction(pred)
        numeric = np.empty_like(x0)
        for i in range(x0.size):
            plus = x0.copy()
            plus[i] += h
            minus = x0.copy()
            minus[i] -= h
            loss_plus, _ = multitask_loss(unflatten_prediction(plus), target, cfg)
            loss_minus, _ = multitask_loss(unflatten_prediction(minus), target, cfg)
            numeric[i] = (loss_plus - loss_minus) / (2 * h)
        denom = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-12)
        assert np.linalg.norm(analytic - numeric) / denom < 1e-5
        assert np.max(np.abs(analytic - numeric)) < 1e-8


# ---------------------------------------------------------------------------
# targets and feature vectors
# ---------------------------------------------------------------------------


def test_targets_validation():
    with pytest.raises(ValidationError):
        AppraisalTargets((1.5,) + (0.0,) * 6, (0,) * 5, (0,) * 4)
    with pytest.raises(ValidationError):
        AppraisalTargets((0.0,) * 7, (0,) * 4, (0,) * 4)
    with pytest.raises(ValidationError):
        AppraisalTargets((0.0,) * 7, (0,) * 5, (0, 1, 2, 0))


def test_feature_vector_coerces_to_float():
    vec = FeatureVector("a", "eng", (1, 2, 3))
    assert vec.values == (1.0, 2.0, 3.0)


def test_feature_vector_validation():
    with pytest.raises(ValidationError):
        FeatureVector("", "eng", (1.0,))
    with pytest.raises(ValidationError):
        FeatureVector("a", "xx", (1.0,))
    with pytest.raises(ValidationError):
        FeatureVector("a", "eng", ())
    with pytest.raises(ValidationError):
        FeatureVector("a", "eng", (float("inf"),))


def test_feature_file_roundtrip(tmp_path):
    vectors = [
        FeatureVector("a", "eng", (0.5, -1.25, 3e-7)),
        FeatureVector("b", "zho", (1.0, 2.0, 3.0)),
    ]
    path = tmp_path / "features.jsonl"
    write_features(vectors, path)
    assert read_features(path) == vectors


def test_feature_file_dimension_constancy(tmp_path):
    path = tmp_path / "features.jsonl"
    path.write_text(
        '{"id": "a", "lang": "eng", "values": [1.0, 2.0]}\n'
        '{"id": "b", "lang": "eng", "values": [1.0]}\n',
        encoding="utf-8",
    )
    with pytest.raises(ValidationError, match="line 2"):
        read_features(path)


def test_feature_file_missing_key_errors(tmp_path):
    path = tmp_path / "features.jsonl"
    path.write_text('{"id": "a", "values": [1.0]}\n', encoding="utf-8")
    with pytest.raises(ParseError):
        read_features(path)


def test_feature_file_malformed_line_names_line(tmp_path):
    path = tmp_path / "features.jsonl"
    path.write_text(
        '{"id": "a", "lang": "eng", "values": [1.0]}\nnope\n', encoding="utf-8"
    )
    with pytest.raises(ParseError, match="line 2"):
        read_features(path)


# ---------------------------------------------------------------------------
# logistic regression
# ---------------------------------------------------------------------------


def separable_data(n=200, seed=0, lang="eng"):
    """Two tight clusters around (1,1) and (-1,-1): margin to the separating
    diagonal is at least 1.5/sqrt(2), comfortably above 0.5."""
    rng = random.Random(seed)
    features, labels = [], []
    for i in range(n):
        bit = i % 2
        base = 1.0 if bit else -1.0
        features.append(
            FeatureVector(
                f"r{i}",
                lang,
                (
                    base + rng.uniform(-0.25, 0.25),
                    base + rng.uniform(-0.25, 0.25),
                ),
            )
        )
        labels.append(SubtaskLabels("S1", (bit,)))
    return features, labels


def test_lr_config_defaults():
    cfg = LRConfig()
    assert cfg.seed == 42
    assert cfg.l2 == 1.0
    assert cfg.max_epochs == 100


def test_lr_separable_data_training_accuracy_one():
    features, labels = separable_data()
    model = lr_train(features, labels)
    assert len(model.history[0]) <= 101  # initial loss + at most 100 epochs
    preds = lr_predict(model, features)
    hits = sum(
        preds.entries[f.id].decisions[0] == l.bits[0]
        for f, l in zip(features, labels)
    )
    assert hits == len(features)


def test_lr_intercept_only_matches_log_odds():
    for positives in (80, 130):
        n = 200
        features = [FeatureVector(f"r{i}", "eng", (0.0, 0.0, 0.0)) for i in range(n)]
        labels = [
            SubtaskLabels("S1", (1 if i < positives else 0,)) for i in range(n)
        ]
        model = lr_train(features, labels)
        p = positives / n
        assert np.all(model.weights == 0.0)
        assert model.bias[0] == pytest.approx(math.log(p / (1 - p)), abs=1e-3)


def test_lr_training_is_bitwise_deterministic():
    features, labels = separable_data(seed=3)
    a = lr_train(features, labels)
    b = lr_train(features, labels)
    assert a.weights.tobytes() == b.weights.tobytes()
    assert a.bias.tobytes() == b.bias.tobytes()


def test_lr_epoch_losses_never_increase():
    features, labels = separable_data(seed=4)
    model = lr_train(features, labels)
    losses = model.history[0]
    assert len(losses) >= 2
    assert all(b <= a for a, b in zip(losses, losses[1:]))


def test_lr_single_class_labels_are_skipped():
    rng = random.Random(5)
    features = [
        FeatureVector(f"r{i}", "eng", (rng.random(), rng.random()))
        for i in range(30)
    ]
    labels = [
        SubtaskLabels(
            "S2", (rng.randint(0, 1), rng.randint(0, 1), 0, rng.randint(0, 1), 1)
        )
        for _ in range(30)
    ]
    # ensure the random columns really carry both classes
    for j in (0, 1, 3):
        column = {l.bits[j] for l in labels}
        assert column == {0, 1}
    with pytest.warns(UserWarning, match="single class"):
        model = lr_train(features, labels)
    assert model.skipped == (2, 4)
    assert model.bias[2] == -30.0
    assert model.bias[4] == 30.0
    preds = lr_predict(model, features)
    for f in features:
        scores = preds.entries[f.id].scores
        assert scores[2] < 1e-9
        assert scores[4] > 1 - 1e-9


def test_lr_train_input_validation():
    features = [FeatureVector("a", "eng", (1.0,))]
    with pytest.raises(ValidationError):
        lr_train(features, [])
    with pytest.raises(ValidationError):
        lr_train([], [])
    mixed_dims = [
        FeatureVector("a", "eng", (1.0,)),
        FeatureVector("b", "eng", (1.0, 2.0)),
    ]
    labels = [SubtaskLabels("S1", (0,)), SubtaskLabels("S1", (1,))]
    with pytest.raises(ValidationError):
        lr_train(mixed_dims, labels)
    mixed_subtasks = [SubtaskLabels("S1", (0,)), SubtaskLabels("S2", (1, 0, 0, 0, 0))]
    features2 = [FeatureVector("a", "eng", (1.0,)), FeatureVector("b", "eng", (2.0,))]
    with pytest.raises(ValidationError):
        lr_train(features2, mixed_subtasks)


def test_lr_predict_zero_model_gives_half():
    model = LRModel(
        weights=np.zeros((1, 3)),
        bias=np.zeros(1),
        config=LRConfig(),
        label_names=("polarization",),
        feature_dim=3,
    )
    features = [FeatureVector("a", "eng", (5.0, -2.0, 1.0))]
    preds = lr_predict(model, features)
    assert preds.entries["a"].scores == (0.5,)
    assert preds.entries["a"].decisions == (1,)  # threshold is inclusive


def test_lr_predict_saturates_on_large_logits():
    model = LRModel(
        weights=np.array([[10.0]]),
        bias=np.array([5.0]),
        config=LRConfig(),
        label_names=("polarization",),
        feature_dim=1,
    )
    preds = lr_predict(model, [FeatureVector("a", "eng", (3.0,))])
    assert preds.entries["a"].scores[0] > 0.999


def test_lr_predict_dimension_mismatch_errors():
    features, labels = separable_data(n=20)
    model = lr_train(features, labels)
    with pytest.raises(ValidationError):
        lr_predict(model, [FeatureVector("x", "eng", (1.0, 2.0, 3.0))])


def test_lr_predict_duplicate_ids_error():
    model = LRModel(
        weights=np.zeros((1, 1)),
        bias=np.zeros(1),
        config=LRConfig(),
        label_names=("polarization",),
        feature_dim=1,
    )
    features = [FeatureVector("a", "eng", (1.0,)), FeatureVector("a", "eng", (2.0,))]
    with pytest.raises(ValidationError):
        lr_predict(model, features)


def test_lr_held_out_auc_on_separable_data():
    features, labels = separable_data(n=100, seed=6)
    (f_tr, y_tr), (f_te, y_te) = split_80_20(features, labels, seed=42)
    model = lr_train(f_tr, y_tr)
    preds = lr_predict(model, f_te)
    scores = [preds.entries[f.id].scores[0] for f in f_te]
    gold = [l.bits[0] for l in y_te]
    assert roc_auc(scores, gold) == 1.0


def test_lr_probability_invariant_under_feature_scaling():
    rng = random.Random(7)
    weights = np.array([[0.8, -1.2, 0.3]])
    bias = np.array([0.25])
    base = LRModel(weights=weights, bias=bias, config=LRConfig(),
                   label_names=("polarization",), feature_dim=3)
    c = 8.0
    scaled = LRModel(weights=weights / c, bias=bias, config=LRConfig(),
                     label_names=("polarization",), feature_dim=3)
    for i in range(20):
        values = tuple(rng.uniform(-2, 2) for _ in range(3))
        f1 = [FeatureVector(f"v{i}", "eng", values)]
        f2 = [FeatureVector(f"v{i}", "eng", tuple(c * v for v in values))]
        p1 = lr_predict(base, f1).entries[f"v{i}"].scores[0]
        p2 = lr_predict(scaled, f2).entries[f"v{i}"].scores[0]
        assert p1 == pytest.approx(p2, abs=1e-12)


# ---------------------------------------------------------------------------
# model persistence
# ---------------------------------------------------------------------------


def test_model_save_load_roundtrip(tmp_path):
    features, labels = separable_data(n=40, seed=8)
    model = lr_train(features, labels)
    path = tmp_path / "model.json"
    save_model(model, path)
    loaded = load_model(path)
    assert loaded.weights.tobytes() == model.weights.tobytes()
    assert loaded.bias.tobytes() == model.bias.tobytes()
    assert loaded.config == model.config
    assert loaded.label_names == model.label_names
    assert loaded.skipped == model.skipped
    original = lr_predict(model, features)
    reloaded = lr_predict(loaded, features)
    assert original.entries == reloaded.entries


def test_model_load_refuses_schema_hash_mismatch(tmp_path):
    features, labels = separable_data(n=20, seed=9)
    model = lr_train(features, labels)
    path = tmp_path / "model.json"
    save_model(model, path)
    payload = json.loads(path.read_text(encoding="utf-8"))
    payload["label_names"] = ["political"]
    path.write_text(json.dumps(payload), encoding="utf-8")
    with pytest.raises(SchemaError, match="refusing"):
        load_model(path)


def test_model_load_rejects_corrupt_file(tmp_path):
    path = tmp_path / "model.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(ParseError):
        load_model(path)
    path.write_text('{"weights": [[0.0]]}', encoding="utf-8")
    with pytest.raises(ParseError):
        load_model(path)


# ---------------------------------------------------------------------------
# split_80_20
# ---------------------------------------------------------------------------


def test_split_ten_into_eight_two():
    features, labels = separable_data(n=10)
    (f_tr, y_tr), (f_te, y_te) = split_80_20(features, labels, seed=1)
    assert len(f_tr) == 8 and len(y_tr) == 8
    assert len(f_te) == 2 and len(y_te) == 2


def test_split_five_into_four_one():
    features, labels = separable_data(n=5)
    (f_tr, _), (f_te, _) = split_80_20(features, labels, seed=1)
    assert len(f_tr) == 4
    assert len(f_te) == 1


def test_split_is_disjoint_exhaustive_and_aligned():
    n = 37
    features = [FeatureVector(f"r{i}", "eng", (float(i),)) for i in range(n)]
    labels = [SubtaskLabels("S1", (i % 2,)) for i in range(n)]
    (f_tr, y_tr), (f_te, y_te) = split_80_20(features, labels, seed=2)
    ids = [f.id for f in f_tr] + [f.id for f in f_te]
    assert sorted(ids) == sorted(f.id for f in features)
    for f, l in list(zip(f_tr, y_tr)) + list(zip(f_te, y_te)):
        assert l.bits[0] == int(f.values[0]) % 2


def test_split_same_seed_same_split():
    features, labels = separable_data(n=30)
    a = split_80_20(features, labels, seed=5)
    b = split_80_20(features, labels, seed=5)
    assert a == b


def test_split_rejects_bad_input():
    features, labels = separable_data(n=4)
    with pytest.raises(ValidationError):
        split_80_20(features, labels[:3], seed=1)
    with pytest.raises(ValidationError):
        split_80_20([], [], seed=1)


# ---------------------------------------------------------------------------
# evaluate_per_language
# ---------------------------------------------------------------------------


def leak_fixture(langs, n_per_lang=100):
    """Features are copies of the gold label bits, so a linear model can
    score the held-out part perfectly."""
    features, labels = [], []
    for lang in langs:
        for i in range(n_per_lang):
            bits = tuple(1 if (i + j) % 3 == 0 else 0 for j in range(5))
            features.append(
                FeatureVector(f"{lang}-{i}", lang, tuple(float(b) for b in bits))
            )
            labels.append(SubtaskLabels("S2", bits))
    return features, labels


def test_evaluate_leak_fixture_scores_one():
    features, labels = leak_fixture(["eng", "tur"])
    report = evaluate_per_language(features, labels, seed=42)
    assert sorted(report.per_language) == ["eng", "tur"]
    for ls in report.per_language.values():
        assert ls.macro_f1 == pytest.approx(1.0)
        assert all(a == pytest.approx(1.0) for a in ls.per_label_auc)


def test_evaluate_report_shape():
    features, labels = leak_fixture(["eng"])
    report = evaluate_per_language(features, labels, seed=42)
    ls = report.per_language["eng"]
    assert report.schema.subtask_id == "S2"
    assert len(ls.per_label_f1) == 5
    assert len(ls.per_label_auc) == 5
    assert len(ls.support) == 5
    assert ls.n == 20  # held-out fifth of 100


def test_evaluate_noise_features_score_near_chance():
    rng = random.Random(1001)
    n = 400
    features = [
        FeatureVector(f"r{i}", "eng", tuple(rng.gauss(0, 1) for _ in range(8)))
        for i in range(n)
    ]
    labels = [SubtaskLabels("S1", (i % 2,)) for i in range(n)]
    aucs = []
    for seed in range(10):
        report = evaluate_per_language(features, labels, seed=seed)
        auc = report.per_language["eng"].per_label_auc[0]
        aucs.append(auc)
        assert 0.3 <= auc <= 0.7
    mean = sum(aucs) / len(aucs)
    assert 0.42 <= mean <= 0.58


def test_evaluate_skips_undersized_language():
    features, labels = leak_fixture(["eng"])
    features += [FeatureVector(f"tiny-{i}", "deu", (0.0,) * 5) for i in range(5)]
    labels += [SubtaskLabels("S2", (0, 1, 0, 0, 0)) for _ in range(5)]
    with pytest.warns(UserWarning, match="deu"):
        report = evaluate_per_language(features, labels, seed=42)
    assert sorted(report.per_language) == ["eng"]


def test_evaluate_all_undersized_errors():
    features = [FeatureVector(f"r{i}", "eng", (1.0,)) for i in range(4)]
    labels = [SubtaskLabels("S1", (i % 2,)) for i in range(4)]
    with pytest.raises(ValidationError):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            evaluate_per_language(features, labels, seed=42)


def test_evaluate_is_deterministic():
    features, labels = leak_fixture(["eng", "deu"], n_per_lang=60)
    a = evaluate_per_language(features, labels, seed=7)
    b = evaluate_per_language(features, labels, seed=7)
    assert a.per_language == b.per_language
