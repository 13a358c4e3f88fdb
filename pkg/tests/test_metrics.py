import numpy as np
import pytest

from lungmtl.errors import (
    EmptyMatrixError,
    LabelOutOfRangeError,
    ShapeMismatchError,
    SingleClassOnlyError,
)
from lungmtl.metrics import (
    ConfusionMatrix,
    confusion,
    history_dump,
    history_load,
    report,
    roc_auc,
)

# --- brute-force oracles ----------------------------------------------------


def tally_oracle(y_true, y_pred, k):
    mat = np.zeros((k, k), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        mat[t][p] += 1
    return mat


def mann_whitney_auc(scores, positive):
    pos = scores[positive]
    neg = scores[~positive]
    total = 0.0
    for p in pos:
        for n in neg:
            total += 1.0 if p > n else (0.5 if p == n else 0.0)
    return total / (len(pos) * len(neg))


class TestConfusion:
    def test_perfect_is_diagonal(self):
        y = np.array([0, 1, 1, 2, 2, 2])
        cm = confusion(y, y, 3)
        np.testing.assert_array_equal(cm.counts, np.diag([1, 2, 3]))
        assert cm.total == 6

    def test_hand_count(self):
        cm = confusion([0, 0, 1], [0, 1, 1], 2)
        np.testing.assert_array_equal(cm.counts, [[1, 1], [0, 1]])

    def test_matches_tally_oracle(self):
        rng = np.random.default_rng(0)
        y_true = rng.integers(0, 5, size=1000)
        y_pred = rng.integers(0, 5, size=1000)
        cm = confusion(y_true, y_pred, 5)
        np.testing.assert_array_equal(cm.counts, tally_oracle(y_true, y_pred, 5))

    def test_label_out_of_range(self):
        with pytest.raises(LabelOutOfRangeError):
            confusion([0, 3], [0, 1], 3)
        with pytest.raises(LabelOutOfRangeError):
            confusion([0, 1], [0, -1], 3)

    def test_length_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            confusion([0, 1], [0], 2)


class TestReport:
    def test_diagonal_all_ones(self):
        rep = report(ConfusionMatrix(np.diag([4, 5, 6]).astype(np.int64)))
        np.testing.assert_allclose(rep.precision, 1.0)
        np.testing.assert_allclose(rep.recall, 1.0)
        np.testing.assert_allclose(rep.f1, 1.0)
        assert rep.accuracy == 1.0
        np.testing.assert_array_equal(rep.support, [4, 5, 6])

    def test_self_confusion_is_perfect(self):
        y = np.random.default_rng(1).integers(0, 4, size=100)
        rep = report(confusion(y, y, 4))
        assert rep.accuracy == 1.0
        np.testing.assert_allclose(rep.f1, 1.0)

    def test_absent_predicted_class_scores_zero(self):
        # class 2 never predicted: precision 0 by convention, no error
        cm = confusion([0, 1, 2, 2], [0, 1, 0, 1], 3)
        rep = report(cm)
        assert rep.precision[2] == 0.0
        assert rep.recall[2] == 0.0
        assert rep.f1[2] == 0.0

    def test_zero_support_class(self):
        cm = confusion([0, 0, 1], [0, 1, 1], 3)  # class 2 has no examples
        rep = report(cm)
        assert rep.support[2] == 0
        assert rep.recall[2] == 0.0

    def test_hand_values(self):
        cm = ConfusionMatrix(np.array([[5, 2], [1, 8]], dtype=np.int64))
        rep = report(cm)
        assert rep.precision[0] == pytest.approx(5 / 6)
        assert rep.recall[0] == pytest.approx(5 / 7)
        assert rep.precision[1] == pytest.approx(8 / 10)
        assert rep.accuracy == pytest.approx(13 / 16)
        assert rep.weighted_recall == pytest.approx(
            (7 * (5 / 7) + 9 * (8 / 9)) / 16)
        assert rep.macro_precision == pytest.approx((5 / 6 + 8 / 10) / 2)

    def test_accuracy_equals_weighted_recall(self):
        rng = np.random.default_rng(2)
        for _ in range(1000):
            k = int(rng.integers(2, 7))
            counts = rng.integers(0, 30, size=(k, k))
            if counts.sum() == 0:
                continue
            rep = report(ConfusionMatrix(counts.astype(np.int64)))
            assert rep.accuracy == pytest.approx(rep.weighted_recall, abs=1e-12)

    def test_empty_matrix(self):
        with pytest.raises(EmptyMatrixError):
            report(ConfusionMatrix(np.zeros((3, 3), dtype=np.int64)))

    def test_wall_time_and_text(self):
        rep = report(confusion([0, 1], [0, 1], 2), wall_time_s=1.25)
        assert rep.wall_time_s == 1.25
        text = rep.to_text(["Crackles", "Wheezes"])
        assert "Crackles" in text and "weighted avg" in text
        assert "precision" in text and "support" in text
        csv = rep.to_csv(["Crackles", "Wheezes"])
        assert csv.startswith("class,precision,recall,f1,support")


class TestRocAuc:
    def test_perfect_separation(self):
        y = np.array([0, 0, 1, 1])
        probs = np.array([[0.9, 0.1], [0.8, 0.2], [0.2, 0.8], [0.1, 0.9]])
        curve = roc_auc(y, probs)
        assert curve.auc[0] == pytest.approx(1.0)
        assert curve.auc[1] == pytest.approx(1.0)
        assert curve.macro_auc == pytest.approx(1.0)

    def test_all_tied_scores(self):
        y = np.array([0, 1, 0, 1])
        probs = np.full((4, 2), 0.5)
        curve = roc_auc(y, probs)
        assert curve.auc[0] == pytest.approx(0.5)
        assert curve.auc[1] == pytest.approx(0.5)

    def test_matches_mann_whitney(self):
        rng = np.random.default_rng(3)
        y = rng.integers(0, 4, size=200)
        raw = rng.uniform(size=(200, 4))
        # inject ties so the tie convention is actually exercised
        raw = np.round(raw, 2)
        probs = raw / raw.sum(axis=1, keepdims=True)
        curve = roc_auc(y, probs)
        for cls in range(4):
            ref = mann_whitney_auc(probs[:, cls], y == cls)
            assert abs(curve.auc[cls] - ref) < 1e-9

    def test_curve_endpoints_and_monotone(self):
        rng = np.random.default_rng(4)
        y = rng.integers(0, 3, size=60)
        probs = rng.dirichlet(np.ones(3), size=60)
        curve = roc_auc(y, probs)
        for cls in range(3):
            fpr, tpr = curve.fpr[cls], curve.tpr[cls]
            assert fpr[0] == 0.0 and tpr[0] == 0.0
            assert fpr[-1] == 1.0 and tpr[-1] == 1.0
            assert np.all(np.diff(fpr) >= 0)
            assert np.all(np.diff(tpr) >= 0)
            assert 0.0 <= curve.auc[cls] <= 1.0

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(5)
        y = rng.integers(0, 3, size=80)
        probs = rng.dirichlet(np.ones(3), size=80)
        base = roc_auc(y, probs)
        warped = roc_auc(y, np.exp(3.0 * probs + 1.0))
        for a, b in zip(base.auc, warped.auc):
            assert a == pytest.approx(b, abs=1e-12)

    def test_degenerate_class_absent(self):
        y = np.array([0, 0, 1, 1])  # class 2 never occurs
        probs = np.random.default_rng(6).dirichlet(np.ones(3), size=4)
        curve = roc_auc(y, probs)
        assert curve.auc[2] is None
        assert curve.fpr[2] is None
        defined = [a for a in curve.auc if a is not None]
        assert curve.macro_auc == pytest.approx(np.mean(defined))

    def test_all_degenerate_raises(self):
        y = np.zeros(5, dtype=int)
        probs = np.random.default_rng(7).dirichlet(np.ones(2), size=5)
        with pytest.raises(SingleClassOnlyError):
            roc_auc(y, probs)

    def test_independent_scores_near_half(self):
        rng = np.random.default_rng(8)
        y = rng.integers(0, 4, size=2000)
        probs = rng.dirichlet(np.ones(4), size=2000)
        curve = roc_auc(y, probs)
        assert abs(curve.macro_auc - 0.5) < 0.1

    def test_bad_inputs(self):
        with pytest.raises(ShapeMismatchError):
            roc_auc([0, 1], np.zeros((3, 2)))
        with pytest.raises(LabelOutOfRangeError):
            roc_auc([0, 5], np.full((2, 2), 0.5))

    def test_csv_smoke(self):
        y = np.array([0, 0, 1, 1])
        probs = np.array([[0.9, 0.1], [0.8, 0.2], [0.2, 0.8], [0.1, 0.9]])
        text = roc_auc(y, probs).to_csv(["a", "b"])
        assert text.startswith("class,fpr,tpr")
        assert "macro avg," in text


class TestHistory:
    def _history(self, epochs=20):
        rng = np.random.default_rng(9)
        return [
            {"epoch": e + 1, "train_loss": float(rng.uniform(0, 3)),
             "val_loss": float(rng.uniform(0, 3)),
             "sound_acc": float(rng.uniform()), "disease_acc": float(rng.uniform())}
            for e in range(epochs)
        ]

    def test_row_count(self):
        text = history_dump(self._history(20))
        lines = text.strip().split("\n")
        assert len(lines) == 21
        assert lines[0] == "epoch,train_loss,val_loss,sound_acc,disease_acc"

    def test_round_trip(self):
        history = self._history(7)
        back = history_load(history_dump(history))
        for orig, rec in zip(history, back):
            assert rec["epoch"] == orig["epoch"]
            for col in ("train_loss", "val_loss", "sound_acc", "disease_acc"):
                assert rec[col] == pytest.approx(orig[col], abs=1e-6)

    def test_epochs_monotone(self):
        back = history_load(history_dump(self._history(12)))
        assert [r["epoch"] for r in back] == list(range(1, 13))

    def test_missing_val_loss(self):
        history = [{"epoch": 1, "train_loss": 1.0, "val_loss": None,
                    "sound_acc": 0.5, "disease_acc": 0.25}]
        back = history_load(history_dump(history))
        assert back[0]["val_loss"] is None
        assert back[0]["train_loss"] == 1.0

    def test_empty_history(self):
        with pytest.raises(ValueError):
            history_dump([])

    def test_not_a_history(self):
        with pytest.raises(ValueError):
            history_load("foo,bar\n1,2\n")
