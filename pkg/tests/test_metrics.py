"""Closed-form checks for the label and model evaluation metrics.

Every metric is pinned to hand-computable values first, then exercised on
its structural properties: distance axioms, permutation invariance of the
calibration binning, linearity of cross-entropy in the target, and the
exact rational arithmetic of the annotation-time model.
"""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from softlabels.labels import LabelSpace, LabelVariety, SoftLabel, hard_label
from softlabels.metrics import (
    EvalSet,
    TimeModel,
    calibration_rmse,
    compare_label_sets,
    entropy,
    estimate_time,
    label_distance,
    pearson_r,
    soft_cross_entropy,
)


def _lab(probs, variety=LabelVariety.OURS_AGG, source="aggregate"):
    return SoftLabel(np.asarray(probs, dtype=float), variety, source)


class TestEntropy:
    """Shannon entropy in nats, with the 0 log 0 = 0 convention."""

    def test_uniform_is_log_k(self):
        np.testing.assert_allclose(
            entropy(np.full(10, 0.1)), math.log(10), atol=1e-12
        )

    def test_one_hot_is_zero(self):
        assert entropy(np.array([0.0, 1.0, 0.0])) == 0.0

    def test_two_point_is_log_two(self):
        np.testing.assert_allclose(
            entropy(np.array([0.5, 0.5, 0.0])), math.log(2), atol=1e-12
        )

    def test_base_two_rescales(self):
        np.testing.assert_allclose(
            entropy(np.array([0.5, 0.5]), base=2), 1.0, atol=1e-12
        )

    def test_accepts_soft_labels(self):
        lab = _lab([0.25, 0.25, 0.25, 0.25])
        np.testing.assert_allclose(entropy(lab), math.log(4), atol=1e-12)


class TestLabelDistance:
    """Half-L1 distance: the worked values and the metric axioms."""

    def test_one_hot_to_uniform(self):
        a = _lab([1.0] + [0.0] * 9)
        b = _lab([0.1] * 10)
        np.testing.assert_allclose(label_distance(a, b), 0.9, atol=1e-12)

    def test_worked_three_class_case(self):
        a = _lab([0.7, 0.2, 0.1])
        b = _lab([0.5, 0.3, 0.2])
        np.testing.assert_allclose(label_distance(a, b), 0.2, atol=1e-12)

    def test_disjoint_support_is_one(self):
        a = _lab([1.0, 0.0])
        b = _lab([0.0, 1.0])
        np.testing.assert_allclose(label_distance(a, b), 1.0, atol=1e-12)

    def test_size_mismatch_raises(self):
        with pytest.raises(ValueError, match="differ"):
            label_distance(_lab([1.0, 0.0]), _lab([1.0, 0.0, 0.0]))

    @settings(max_examples=100, deadline=None)
    @given(
        raw=st.lists(
            st.tuples(
                st.floats(0.01, 1.0), st.floats(0.01, 1.0), st.floats(0.01, 1.0)
            ),
            min_size=3,
            max_size=3,
        )
    )
    def test_metric_axioms(self, raw):
        """Symmetry, identity, the triangle inequality, and the [0,1] range."""
        labs = []
        for trip in raw:
            arr = np.asarray(trip)
            labs.append(_lab(arr / arr.sum()))
        a, b, c = labs
        dab = label_distance(a, b)
        assert abs(dab - label_distance(b, a)) < 1e-15
        assert label_distance(a, a) == 0.0
        assert 0.0 <= dab <= 1.0 + 1e-15
        assert dab <= label_distance(a, c) + label_distance(c, b) + 1e-12


class TestPearson:
    """Sample correlation against closed-form values."""

    def test_worked_value(self):
        # x=[0,1,2], y=[0,1,3]: r = 3*sqrt(3) / (2*sqrt(7))
        r = pearson_r([0.0, 1.0, 2.0], [0.0, 1.0, 3.0])
        np.testing.assert_allclose(
            r, 3.0 * math.sqrt(3.0) / (2.0 * math.sqrt(7.0)), atol=1e-12
        )

    def test_perfect_positive(self):
        np.testing.assert_allclose(
            pearson_r([1.0, 2.0, 3.0], [10.0, 20.0, 30.0]), 1.0, atol=1e-12
        )

    def test_perfect_negative(self):
        np.testing.assert_allclose(
            pearson_r([1.0, 2.0, 3.0], [3.0, 2.0, 1.0]), -1.0, atol=1e-12
        )

    def test_constant_input_raises(self):
        with pytest.raises(ValueError, match="degenerate"):
            pearson_r([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])

    def test_short_input_raises(self):
        with pytest.raises(ValueError, match="two points"):
            pearson_r([1.0], [2.0])


class TestSoftCrossEntropy:
    """Mean negative log-likelihood under distribution targets."""

    def test_uniform_predictions_score_log_k(self):
        """Against any target, uniform predictions cost exactly log K."""
        preds = np.full((4, 5), 0.2)
        rng = np.random.default_rng(42)
        targets = rng.dirichlet(np.ones(5), size=4)
        np.testing.assert_allclose(
            soft_cross_entropy(preds, targets), math.log(5), atol=1e-12
        )

    def test_worked_two_example_value(self):
        preds = np.array([[0.7, 0.2, 0.1], [0.1, 0.8, 0.1]])
        targets = np.array([[0.6, 0.3, 0.1], [0.2, 0.7, 0.1]])
        expected = -0.5 * (
            0.6 * math.log(0.7)
            + 0.3 * math.log(0.2)
            + 0.1 * math.log(0.1)
            + 0.2 * math.log(0.1)
            + 0.7 * math.log(0.8)
            + 0.1 * math.log(0.1)
        )
        np.testing.assert_allclose(
            soft_cross_entropy(preds, targets), expected, atol=1e-12
        )

    def test_matching_one_hots_cost_nothing(self):
        preds = np.array([[1.0, 0.0], [0.0, 1.0]])
        np.testing.assert_allclose(soft_cross_entropy(preds, preds), 0.0, atol=1e-12)

    def test_zero_prediction_is_floored_finite(self):
        """Mass on a zero-probability prediction costs -log(floor), not inf."""
        preds = np.array([[0.0, 1.0]])
        targets = np.array([[1.0, 0.0]])
        loss = soft_cross_entropy(preds, targets)
        np.testing.assert_allclose(loss, -math.log(1e-12), atol=1e-9)
        assert math.isfinite(loss) and loss > 0.0

    def test_accepts_label_lists(self):
        labels = [_lab([0.5, 0.5]), _lab([1.0, 0.0])]
        preds = np.array([[0.5, 0.5], [0.9, 0.1]])
        expected = -0.5 * (math.log(0.5) + math.log(0.9))
        np.testing.assert_allclose(
            soft_cross_entropy(preds, labels), expected, atol=1e-12
        )

    def test_shape_mismatch_raises(self):
        with pytest.raises(ValueError, match="shape"):
            soft_cross_entropy(np.ones((2, 3)) / 3, np.ones((3, 3)) / 3)

    def test_linear_in_the_target(self):
        """CE against an average target equals the average of member CEs."""
        rng = np.random.default_rng(42)
        preds = rng.dirichlet(np.ones(6), size=8)
        members = [rng.dirichlet(np.ones(6), size=8) for _ in range(5)]
        pooled = np.mean(members, axis=0)
        direct = soft_cross_entropy(preds, pooled)
        averaged = np.mean([soft_cross_entropy(preds, m) for m in members])
        np.testing.assert_allclose(direct, averaged, atol=1e-9)


class TestCalibrationRmse:
    """Equal-mass binning of confidence against argmax accuracy."""

    def test_single_bin_worked_value(self):
        """Four 0.9-confident predictions at 50% accuracy gap to 0.4."""
        preds = np.tile([0.9, 0.1], (4, 1))
        targets = np.array([[1, 0], [1, 0], [0, 1], [0, 1]], dtype=float)
        np.testing.assert_allclose(
            calibration_rmse(preds, targets, bin_size=4), 0.4, atol=1e-12
        )

    def test_two_bin_weighted_value(self):
        """Bins contribute their gap squared, weighted by occupancy."""
        preds = np.array([[0.6, 0.4], [0.6, 0.4], [0.9, 0.1], [0.9, 0.1]])
        targets = np.array([[1, 0], [1, 0], [0, 1], [0, 1]], dtype=float)
        # low-confidence bin: gap 0.6-1.0; high: gap 0.9-0.0
        expected = math.sqrt(0.5 * 0.4**2 + 0.5 * 0.9**2)
        np.testing.assert_allclose(
            calibration_rmse(preds, targets, bin_size=2), expected, atol=1e-12
        )

    def test_perfectly_calibrated_sharp_predictions(self):
        """Always-correct one-hot predictions have zero calibration error."""
        preds = np.eye(3)[[0, 1, 2, 0, 1, 2]]
        np.testing.assert_allclose(
            calibration_rmse(preds, preds.copy(), bin_size=3), 0.0, atol=1e-12
        )

    def test_last_bin_absorbs_the_remainder(self):
        """n=5 with bin_size=2 yields bins of 2 and 3, never a bin of 1."""
        preds = np.array(
            [[0.5, 0.5], [0.6, 0.4], [0.7, 0.3], [0.8, 0.2], [0.9, 0.1]]
        )
        targets = np.tile([1.0, 0.0], (5, 1))
        # all correct: bins (0.5,0.6) and (0.7,0.8,0.9) against accuracy 1
        gap1 = (0.5 + 0.6) / 2 - 1.0
        gap2 = (0.7 + 0.8 + 0.9) / 3 - 1.0
        expected = math.sqrt((2 / 5) * gap1**2 + (3 / 5) * gap2**2)
        np.testing.assert_allclose(
            calibration_rmse(preds, targets, bin_size=2), expected, atol=1e-12
        )

    def test_example_order_does_not_matter(self):
        """Shuffling examples, ties included, never changes the result."""
        rng = np.random.default_rng(42)
        preds = rng.dirichlet(np.ones(4), size=30)
        preds[10:20] = preds[0:10]  # force confidence ties across the split
        targets = rng.dirichlet(np.ones(4), size=30)
        base = calibration_rmse(preds, targets, bin_size=7)
        for _ in range(10):
            perm = rng.permutation(30)
            np.testing.assert_allclose(
                calibration_rmse(preds[perm], targets[perm], bin_size=7),
                base,
                atol=1e-15,
            )

    def test_too_few_examples_raises(self):
        preds = np.tile([0.9, 0.1], (3, 1))
        with pytest.raises(ValueError, match="at least"):
            calibration_rmse(preds, preds.copy(), bin_size=4)

    def test_bad_bin_size_raises(self):
        preds = np.tile([0.9, 0.1], (3, 1))
        with pytest.raises(ValueError, match="positive"):
            calibration_rmse(preds, preds.copy(), bin_size=0)


class TestTimeModel:
    """Exact per-variety annotation costs on the decimal grid."""

    def test_six_annotator_costs_are_exact(self):
        """M=6 lands exactly on 76.8 / 115.2 / 153.6 / 192.0 seconds."""
        assert estimate_time(6, LabelVariety.T1_UNIF) == 76.8
        assert estimate_time(6, LabelVariety.T1_CLAMP) == 115.2
        assert estimate_time(6, LabelVariety.T2_UNIF) == 153.6
        assert estimate_time(6, LabelVariety.T2_CLAMP) == 192.0

    def test_hard_labeling_cost(self):
        """51 hard votes at 1.8 seconds each cost exactly 91.8 seconds."""
        assert estimate_time(51, LabelVariety.HARD) == 91.8

    def test_select_top2_shares_the_two_input_rate(self):
        assert estimate_time(6, LabelVariety.SELECT_TOP2) == 76.8

    def test_cost_scales_linearly_in_m(self):
        one = estimate_time(1, LabelVariety.T2_CLAMP)
        assert estimate_time(10, LabelVariety.T2_CLAMP) == 10 * one

    def test_custom_rates(self):
        tm = TimeModel(t_per_input=2.5, t_per_hard=0.5)
        assert estimate_time(4, LabelVariety.T2_CLAMP, tm) == 4 * 5 * 2.5
        assert estimate_time(4, LabelVariety.HARD, tm) == 2.0

    def test_zero_annotators_rejected(self):
        with pytest.raises(ValueError, match="positive"):
            estimate_time(0, LabelVariety.HARD)

    def test_unknown_variety_rejected(self):
        with pytest.raises(ValueError, match="no input count"):
            estimate_time(3, LabelVariety.MULTI_AGG)

    def test_nonpositive_rates_rejected(self):
        with pytest.raises(ValueError, match="positive"):
            TimeModel(t_per_input=0.0)


class TestEvalSet:
    """Container behavior for named held-out sets."""

    def test_accessors(self):
        entries = (
            ("img-0", np.array([0.1, 0.2]), _lab([1.0, 0.0])),
            ("img-1", np.array([0.3, 0.4]), _lab([0.0, 1.0])),
        )
        ev = EvalSet(name="dev", entries=entries)
        assert len(ev) == 2
        assert ev.image_ids == ["img-0", "img-1"]
        assert ev.features.shape == (2, 2)
        assert [lab.argmax() for lab in ev.labels] == [0, 1]

    def test_empty_set_rejected(self):
        with pytest.raises(ValueError, match="at least one"):
            EvalSet(name="dev", entries=())


class TestCompareLabelSets:
    """Joint statistics of two per-image label maps."""

    def test_identical_sets(self):
        space = LabelSpace(names=tuple(f"c{i}" for i in range(4)))
        labels = {
            "a": hard_label(0, space),
            "b": _lab([0.4, 0.3, 0.2, 0.1]),
            "c": _lab([0.25, 0.25, 0.25, 0.25]),
        }
        report = compare_label_sets(labels, dict(labels))
        assert report.n_images == 3
        np.testing.assert_allclose(report.mean_distance, 0.0, atol=1e-15)
        np.testing.assert_allclose(report.entropy_pearson_r, 1.0, atol=1e-12)

    def test_uses_only_shared_images(self):
        space = LabelSpace(names=("x", "y"))
        a = {"i": hard_label(0, space), "only-a": hard_label(1, space)}
        b = {"i": hard_label(1, space), "only-b": hard_label(0, space)}
        report = compare_label_sets(a, b)
        assert report.n_images == 1
        np.testing.assert_allclose(report.mean_distance, 1.0, atol=1e-15)
        assert report.entropy_pearson_r is None  # one image: no correlation

    def test_diagnostics_carry_mass_and_zero_counts(self):
        space = LabelSpace(names=("x", "y", "z"))
        a = {"i": _lab([0.5, 0.5, 0.0])}
        b = {"i": hard_label(2, space)}
        diag = compare_label_sets(a, b).diagnostics[0]
        assert diag.image_id == "i"
        assert diag.top_mass_a == 0.5
        assert diag.top_mass_b == 1.0
        assert diag.zero_classes_a == 1
        assert diag.zero_classes_b == 2
        np.testing.assert_allclose(diag.distance, 1.0, atol=1e-15)

    def test_disjoint_sets_raise(self):
        space = LabelSpace(names=("x", "y"))
        with pytest.raises(ValueError, match="share no"):
            compare_label_sets({"a": hard_label(0, space)}, {"b": hard_label(0, space)})

    def test_round_trip_dict(self):
        space = LabelSpace(names=("x", "y"))
        report = compare_label_sets(
            {"i": hard_label(0, space)}, {"i": _lab([0.6, 0.4])}
        )
        data = report.to_dict()
        assert data["n_images"] == 1
        assert len(data["diagnostics"]) == 1
        assert set(data["diagnostics"][0]) == {
            "image_id",
            "top_mass_a",
            "top_mass_b",
            "zero_classes_a",
            "zero_classes_b",
            "distance",
        }
