"""Scoring: decoding, frame-level matching, macro averages, aggregate error."""

import numpy as np
import pytest

from seldkit.data import AccdoaFrame, Dataset
from seldkit.metrics import (
    aggregate_seld_error,
    angular_distance_deg,
    decode_predictions,
    evaluate,
)

# published reference rows: (ER, F, LE degrees, LR) -> reported aggregate
REFERENCE_ROWS = {
    "A0": (0.625, 0.2777, 50.5, 0.4029, 0.556),
    "I0": (0.661, 0.2568, 35.7, 0.4077, 0.549),
    "A1": (0.619, 0.2792, 42.9, 0.4049, 0.543),
    "M1": (0.644, 0.2787, 41.6, 0.4075, 0.547),
    "A2": (0.638, 0.3095, 20.7, 0.4846, 0.490),
    "M2": (0.637, 0.3167, 21.1, 0.4903, 0.487),
    "A3": (0.626, 0.3121, 20.6, 0.5065, 0.480),
    "M3": (0.633, 0.3110, 20.9, 0.5213, 0.479),
    "A4": (0.636, 0.3057, 19.8, 0.5013, 0.485),
    "M4": (0.620, 0.3172, 19.1, 0.5112, 0.474),
}


def unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def dataset_from_arrays(targets, predictions):
    frames = tuple(
        AccdoaFrame(targets=targets[t], predictions=predictions[t], frame_index=t)
        for t in range(len(targets))
    )
    return Dataset(frames=frames)


class TestDecode:
    def test_above_threshold(self):
        ds = dataset_from_arrays(np.array([[[0, 0, 1.0]]]), np.array([[[0, 0, 0.9]]]))
        events = decode_predictions(ds)
        assert len(events) == 1
        assert (events[0].t, events[0].c) == (0, 0)
        np.testing.assert_allclose(events[0].doa, [0, 0, 1.0])

    def test_below_threshold(self):
        ds = dataset_from_arrays(np.array([[[0, 0, 1.0]]]), np.array([[[0, 0, 0.3]]]))
        assert decode_predictions(ds) == []

    def test_zero_prediction(self):
        ds = dataset_from_arrays(np.array([[[0, 0, 1.0]]]), np.array([[[0, 0, 0.0]]]))
        assert decode_predictions(ds) == []

    def test_threshold_domain(self):
        ds = dataset_from_arrays(np.array([[[0, 0, 1.0]]]), np.array([[[0, 0, 0.9]]]))
        for bad in (0.0, 1.0, -0.5, 2.0):
            with pytest.raises(ValueError):
                decode_predictions(ds, activity_threshold=bad)

    def test_matches_evaluate_convention(self):
        rng = np.random.default_rng(9)
        targets = np.zeros((10, 3, 3))
        targets[0, 0] = [0, 0, 1.0]
        predictions = rng.uniform(-0.8, 0.8, size=(10, 3, 3))
        ds = dataset_from_arrays(targets, predictions)
        events = {(e.t, e.c) for e in decode_predictions(ds)}
        det = np.linalg.norm(predictions, axis=-1) > 0.5
        assert events == set(zip(*np.nonzero(det)))


class TestAggregate:
    def test_reference_rows_recombine(self):
        for name, (er, f, le, lr, reported) in REFERENCE_ROWS.items():
            assert aggregate_seld_error(er, f, le, lr) == pytest.approx(
                reported, abs=1e-3), name

    def test_named_examples(self):
        assert aggregate_seld_error(0.625, 0.2777, 50.5, 0.4029) == pytest.approx(
            0.5562, abs=1e-4)
        assert aggregate_seld_error(0.620, 0.3172, 19.1, 0.5112) == pytest.approx(
            0.4744, abs=1e-4)
        assert aggregate_seld_error(0.0, 1.0, 0.0, 1.0) == 0.0

    def test_relative_improvement(self):
        # best ladder entry vs squared-error baseline: 14.7% reported
        rel = (0.556 - 0.474) / 0.556
        assert rel == pytest.approx(0.147, abs=1e-3)

    def test_domain_violations(self):
        with pytest.raises(ValueError):
            aggregate_seld_error(-0.1, 0.5, 20.0, 0.5)
        with pytest.raises(ValueError):
            aggregate_seld_error(0.5, 1.5, 20.0, 0.5)
        with pytest.raises(ValueError):
            aggregate_seld_error(0.5, 0.5, 181.0, 0.5)
        with pytest.raises(ValueError):
            aggregate_seld_error(0.5, 0.5, 20.0, -0.1)


class TestEvaluate:
    def test_perfect_single_detection(self):
        doa = unit([1.0, 1.0, 0.0])
        near = unit([1.0, 0.9, 0.0])  # ~3 degrees off, well inside the gate
        ds = dataset_from_arrays(np.array([[doa]]), np.array([[0.9 * near]]))
        m = evaluate(ds)
        pc = m.per_class[0]
        assert pc.f20 == 1.0
        assert pc.er20 == 0.0
        assert pc.lr_cd == 1.0
        assert pc.le_cd == pytest.approx(float(angular_distance_deg(doa, near)))
        assert m.e_seld == pytest.approx(
            aggregate_seld_error(m.er20, m.f20, m.le_cd, m.lr_cd))

    def test_silent_class_penalized(self):
        # class 1 active in the reference but never predicted
        targets = np.zeros((2, 2, 3))
        targets[:, 0] = [0, 0, 1.0]
        targets[0, 1] = [1.0, 0, 0]
        predictions = np.zeros((2, 2, 3))
        predictions[:, 0] = [0, 0, 0.9]
        m = evaluate(dataset_from_arrays(targets, predictions))
        silent = m.per_class[1]
        assert silent.lr_cd == 0.0
        assert silent.le_cd == 180.0
        assert silent.f20 == 0.0

    def test_match_beyond_gate_is_miss_plus_insertion(self):
        # detection 30 degrees off: counts for LE/LR, fails ER/F
        doa = np.array([0.0, 0.0, 1.0])
        off = unit([np.sin(np.deg2rad(30.0)), 0.0, np.cos(np.deg2rad(30.0))])
        ds = dataset_from_arrays(np.array([[doa]]), np.array([[off]]))
        m = evaluate(ds)
        pc = m.per_class[0]
        assert pc.er20 == pytest.approx(2.0)  # one deletion + one insertion
        assert pc.f20 == 0.0
        assert pc.lr_cd == 1.0
        assert pc.le_cd == pytest.approx(30.0, abs=1e-9)
        assert m.e_seld == pytest.approx((2.0 + 1.0 + 30.0 / 180.0 + 0.0) / 4.0)

    def test_false_positive_only_class(self):
        targets = np.zeros((4, 2, 3))
        targets[:, 0] = [0, 0, 1.0]
        predictions = np.zeros((4, 2, 3))
        predictions[:, 0] = [0, 0, 1.0]
        predictions[1, 1] = [0.9, 0, 0]  # insertion for a class never active
        m = evaluate(dataset_from_arrays(targets, predictions))
        ghost = m.per_class[1]
        assert ghost.er20 == pytest.approx(1.0)  # one insertion over floor-1 frames
        assert ghost.lr_cd == 0.0
        assert ghost.le_cd == 180.0

    def test_macro_is_class_mean(self):
        rng = np.random.default_rng(19)
        targets = np.zeros((30, 3, 3))
        for t in range(30):
            for c in range(3):
                if rng.random() < 0.5 or t == c:
                    v = rng.standard_normal(3)
                    targets[t, c] = v / np.linalg.norm(v)
        predictions = rng.uniform(-1, 1, size=(30, 3, 3))
        m = evaluate(dataset_from_arrays(targets, predictions))
        assert m.er20 == pytest.approx(np.mean([p.er20 for p in m.per_class]))
        assert m.f20 == pytest.approx(np.mean([p.f20 for p in m.per_class]))
        assert m.le_cd == pytest.approx(np.mean([p.le_cd for p in m.per_class]))
        assert m.lr_cd == pytest.approx(np.mean([p.lr_cd for p in m.per_class]))

    def test_empty_reference_rejected(self):
        ds = dataset_from_arrays(np.zeros((3, 2, 3)), np.zeros((3, 2, 3)))
        with pytest.raises(ValueError, match="no active frames"):
            evaluate(ds)

    def test_bounds(self):
        rng = np.random.default_rng(29)
        for _ in range(20):
            targets = np.zeros((15, 3, 3))
            for t in range(15):
                for c in range(3):
                    if rng.random() < 0.6 or t == c:
                        v = rng.standard_normal(3)
                        targets[t, c] = v / np.linalg.norm(v)
            predictions = rng.uniform(-0.9, 0.9, size=targets.shape)
            m = evaluate(dataset_from_arrays(targets, predictions))
            assert 0.0 <= m.f20 <= 1.0
            assert 0.0 <= m.lr_cd <= 1.0
            assert 0.0 <= m.le_cd <= 180.0
            assert m.er20 >= 0.0
            if m.er20 <= 1.0:
                assert 0.0 <= m.e_seld <= 1.25

    def test_added_detection_never_hurts_f_or_lr(self):
        rng = np.random.default_rng(59)
        for _ in range(20):
            targets = np.zeros((12, 2, 3))
            for t in range(12):
                for c in range(2):
                    if rng.random() < 0.5 or t == c:
                        v = rng.standard_normal(3)
                        targets[t, c] = v / np.linalg.norm(v)
            predictions = rng.uniform(-0.8, 0.8, size=targets.shape)
            ds = dataset_from_arrays(targets, predictions)
            ref = ds.activity
            det = np.linalg.norm(predictions, axis=-1) > 0.5
            missing = np.argwhere(ref & ~det)
            if len(missing) == 0:
                continue
            t, c = missing[rng.integers(len(missing))]
            before = evaluate(ds)
            fixed = predictions.copy()
            fixed[t, c] = targets[t, c]  # exact hit, inside any gate
            after = evaluate(dataset_from_arrays(targets, fixed))
            assert after.per_class[c].f20 >= before.per_class[c].f20
            assert after.per_class[c].lr_cd >= before.per_class[c].lr_cd

    def test_parameter_domains(self):
        ds = dataset_from_arrays(np.array([[[0, 0, 1.0]]]), np.array([[[0, 0, 0.9]]]))
        with pytest.raises(ValueError):
            evaluate(ds, threshold_deg=0.0)
        with pytest.raises(ValueError):
            evaluate(ds, activity_threshold=1.0)
