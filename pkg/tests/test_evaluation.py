import json
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shemo_ser.corpus.labels import TARGET_TAGS, EmotionLabel
from shemo_ser.evaluation import (
    UndefinedPrecisionWarning,
    confusion,
    emit_report,
    evaluate,
    per_class,
    report_from_confusion,
    weighted_metrics,
)
from shemo_ser.evaluation.metrics import EvaluationReport
from shemo_ser.training import EpochRecord, TrainingHistory

pytestmark = pytest.mark.filterwarnings("ignore::shemo_ser.evaluation.metrics.UndefinedPrecisionWarning")


class FixedModel:
    """Predicts a stored class per input row (inputs are the class codes)."""

    def __init__(self, label_names=TARGET_TAGS):
        self.label_names = tuple(label_names)

    def codes_for_columns(self):
        return np.array([int(EmotionLabel.from_tag(t)) for t in self.label_names])

    def predict_proba(self, inputs):
        codes = np.asarray(inputs, dtype=int).ravel()
        col = {int(EmotionLabel.from_tag(t)): i for i, t in enumerate(self.label_names)}
        p = np.full((codes.size, 5), 0.01)
        p[np.arange(codes.size), [col[c] for c in codes]] = 0.96
        return p


def naive_metrics(y_true, y_pred, n=5):
    """From-definition oracle: explicit loops, no matrix algebra."""
    total = len(y_true)
    correct = sum(1 for t, p in zip(y_true, y_pred) if t == p)
    out = {"accuracy": correct / total, "precision": [], "recall": [], "f1": [], "support": []}
    for c in range(n):
        tp = sum(1 for t, p in zip(y_true, y_pred) if t == c and p == c)
        fn = sum(1 for t, p in zip(y_true, y_pred) if t == c and p != c)
        fp = sum(1 for t, p in zip(y_true, y_pred) if t != c and p == c)
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        out["precision"].append(prec)
        out["recall"].append(rec)
        out["f1"].append(f1)
        out["support"].append(tp + fn)
    present = [c for c in range(n) if out["support"][c] > 0]
    for k in ("precision", "recall", "f1"):
        out[f"weighted_{k}"] = sum(out[k][c] * out["support"][c] for c in range(n)) / total
        out[f"macro_{k}"] = sum(out[k][c] for c in present) / len(present)
    return out


def test_confusion_basic_and_errors():
    assert confusion([], []).sum() == 0
    assert (confusion([0, 1, 2, 3, 4], [0, 1, 2, 3, 4]) == np.eye(5, dtype=int)).all()
    with pytest.raises(ValueError, match="length"):
        confusion([0, 1], [0])
    with pytest.raises(ValueError, match=r"\[0, 4\]"):
        confusion([5], [0])
    with pytest.raises(ValueError, match="empty"):
        weighted_metrics(confusion([], []))


def test_confusion_matches_double_loop():
    rng = np.random.default_rng(0)
    t, p = rng.integers(0, 5, 1000), rng.integers(0, 5, 1000)
    m = np.zeros((5, 5), dtype=int)
    for i in range(5):
        for j in range(5):
            m[i, j] = sum(1 for a, b in zip(t, p) if a == i and b == j)
    assert (confusion(t, p) == m).all()


def test_hand_enumerated_example():
    rep = report_from_confusion(confusion([0, 0, 1, 1, 2], [0, 1, 1, 1, 2]))
    assert rep.accuracy == pytest.approx(0.8)
    assert rep.recall[:3] == pytest.approx([0.5, 1.0, 1.0])
    assert rep.weighted_recall == rep.accuracy


def test_diagonal_is_perfect():
    agg = weighted_metrics(np.diag([3, 1, 4, 1, 5]))
    assert all(v == 1.0 for v in agg.values())


def test_two_class_collapse():
    m = confusion([0, 0, 0, 1], [0, 0, 0, 0])
    with pytest.warns(UndefinedPrecisionWarning, match=r"\[1\]"):
        agg = weighted_metrics(m)
    assert agg["accuracy"] == 0.75
    assert agg["weighted_recall"] == 0.75
    assert agg["macro_recall"] == 0.5


def test_precision_warning_emitted_once_per_report():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        report_from_confusion(confusion([0, 1], [0, 0]))
    assert sum(issubclass(w.category, UndefinedPrecisionWarning) for w in caught) == 1


def test_constant_anger_on_filtered_shemo(shemo_manifest):
    from shemo_ser.corpus import filter_fear

    labels = [e.label for e in filter_fear(shemo_manifest).entries]
    assert len(labels) == 2962
    rep = evaluate(FixedModel(), np.zeros(len(labels)), labels)
    assert rep.accuracy == pytest.approx(1059 / 2962, abs=1e-12)
    assert rep.n_samples == 2962


def test_perfect_predictor():
    labels = [0, 1, 2, 3, 4, 4, 2]
    rep = evaluate(FixedModel(), np.array(labels), labels)
    assert rep.accuracy == 1.0
    assert (np.array(rep.confusion) == np.diag(np.bincount(labels, minlength=5))).all()


def test_permuted_model_columns_map_back_to_codes():
    labels = [0, 1, 2, 3, 4]
    rep = evaluate(FixedModel(label_names=TARGET_TAGS[::-1]), np.array(labels), labels)
    assert rep.accuracy == 1.0


def test_evaluate_errors():
    with pytest.raises(ValueError, match="empty"):
        evaluate(FixedModel(), np.zeros(0), [])
    with pytest.raises(ValueError, match="label map"):
        evaluate(FixedModel(), np.zeros(1), ["fear"])


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_oracle_equivalence_1000_pairs(seed):
    rng = np.random.default_rng(seed)
    n_present = rng.integers(1, 6)
    t = rng.integers(0, n_present, 1000)
    p = rng.integers(0, 5, 1000)
    rep = report_from_confusion(confusion(t, p))
    ref = naive_metrics(t.tolist(), p.tolist())
    for key in ("precision", "recall", "f1"):
        np.testing.assert_allclose(getattr(rep, key), ref[key], rtol=0, atol=1e-9)
        for avg in ("weighted", "macro"):
            assert abs(getattr(rep, f"{avg}_{key}") - ref[f"{avg}_{key}"]) < 1e-9
    assert rep.support == ref["support"]
    assert abs(rep.accuracy - ref["accuracy"]) < 1e-9
    assert rep.weighted_recall == rep.accuracy


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4)), min_size=1, max_size=60), st.randoms())
def test_permutation_invariance(pairs, rnd):
    t = [a for a, _ in pairs]
    p = [b for _, b in pairs]
    shuffled = pairs[:]
    rnd.shuffle(shuffled)
    a = evaluate(FixedModel(), np.array(p), t)
    b = evaluate(FixedModel(), np.array([y for _, y in shuffled]), [x for x, _ in shuffled])
    assert a == b
    assert np.array(a.confusion).sum() == a.n_samples
    assert a.weighted_recall == a.accuracy


def test_report_roundtrip():
    rep = report_from_confusion(confusion([0, 1, 2], [0, 1, 1]), split="val")
    assert EvaluationReport.from_dict(json.loads(json.dumps(rep.to_dict()))) == rep


# -- emit_report --------------------------------------------------------------

REPORT_FILES = {"metrics.json", "metrics.txt", "confusion.csv", "confusion.png", "curves.csv", "curves.png"}


def _history(n=5):
    h = TrainingHistory()
    for e in range(1, n + 1):
        h.append(EpochRecord(e, 1.0 / e, 0.2 * e / n + 0.5, 1.2 / e, 0.15 * e / n + 0.5, 1e-3))
    return h


def _report():
    return report_from_confusion(confusion([0, 1, 2, 3, 4, 0], [0, 1, 2, 3, 3, 0]))


def test_emit_report_files(tmp_path):
    written = emit_report(_report(), _history(), tmp_path)
    assert {p.name for p in written} == REPORT_FILES
    assert {p.name for p in tmp_path.iterdir()} == REPORT_FILES
    assert json.loads((tmp_path / "metrics.json").read_text())["accuracy"] == pytest.approx(5 / 6)
    assert (tmp_path / "confusion.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    rows = (tmp_path / "curves.csv").read_text().splitlines()
    assert rows[0] == "epoch,train_loss,train_acc,val_loss,val_acc,lr" and len(rows) == 6
    conf = (tmp_path / "confusion.csv").read_text().splitlines()
    assert conf[0].split(",")[1:] == list(TARGET_TAGS)


def test_emit_report_empty_history(tmp_path, caplog):
    emit_report(_report(), _history(), tmp_path)
    with caplog.at_level("INFO"):
        written = emit_report(_report(), TrainingHistory(), tmp_path)
    assert "skipping" in caplog.text
    assert {p.name for p in written} == REPORT_FILES - {"curves.csv", "curves.png"}
    assert {p.name for p in tmp_path.iterdir()} == REPORT_FILES - {"curves.csv", "curves.png"}


def test_emit_report_rerun_replaces(tmp_path):
    emit_report(_report(), _history(), tmp_path)
    first = {p.name: p.read_bytes() for p in tmp_path.iterdir()}
    other = report_from_confusion(confusion([0, 1], [1, 1]))
    emit_report(other, _history(3), tmp_path)
    second = {p.name: p.read_bytes() for p in tmp_path.iterdir()}
    assert set(first) == set(second) == REPORT_FILES
    assert json.loads(second["metrics.json"])["accuracy"] == 0.5
    emit_report(_report(), _history(), tmp_path)
    assert {p.name: p.read_bytes() for p in tmp_path.iterdir()} == first


def test_emit_report_unwritable(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        emit_report(_report(), None, blocker / "sub")
