"""Soft-label construction and aggregation on the probability simplex.

Verifies the worked redistribution examples for every elicitation variety,
the simplex invariants over randomized records, and the exact recovery
identities of both aggregation styles.
"""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from softlabels.labels import (
    ELICITED_VARIETIES,
    LabelPool,
    LabelSpace,
    LabelVariety,
    RedistributionMode,
    RedistributionPolicy,
    SoftLabel,
    aggregate_mean,
    baseline_label,
    construct_label,
    hard_label,
    multi_aggregate,
    smooth_labels,
    softmax_smooth,
)
from tests.conftest import CIFAR_NAMES, make_record

CLAMP = RedistributionPolicy(mode=RedistributionMode.CLAMP, gamma=0.1)
UNIF = RedistributionPolicy(mode=RedistributionMode.UNIFORM, gamma=0.1)
SPACE10 = LabelSpace(names=CIFAR_NAMES)


class TestConstructWorkedExamples:
    """Hand-computed labels for the canonical elicitation response."""

    # top1=cat(3) at 70%, top2=dog(5) at 20%, bird(2) and airplane(0) excluded
    def record(self):
        return make_record(top1=3, p1=70.0, top2=5, p2=20.0, definitely_not=(2, 0))

    def test_t2_clamp(self, space10):
        """Leftover 10% spreads over the 6 unassigned, unexcluded classes."""
        lab = construct_label(self.record(), space10, LabelVariety.T2_CLAMP, CLAMP)
        expected = np.zeros(10)
        expected[3] = 0.70
        expected[5] = 0.20
        for i in (1, 4, 6, 7, 8, 9):
            expected[i] = 0.10 / 6
        np.testing.assert_allclose(lab.probs, expected, atol=1e-12)

    def test_t2_unif(self, space10):
        """UNIF ignores the exclusions: leftover spreads over all 8 others."""
        lab = construct_label(self.record(), space10, LabelVariety.T2_UNIF, UNIF)
        expected = np.full(10, 0.10 / 8)
        expected[3] = 0.70
        expected[5] = 0.20
        np.testing.assert_allclose(lab.probs, expected, atol=1e-12)

    def test_t1_clamp(self, space10):
        """T1 drops the second pair; 30% leftover spreads over 7 classes."""
        lab = construct_label(self.record(), space10, LabelVariety.T1_CLAMP, CLAMP)
        expected = np.zeros(10)
        expected[3] = 0.70
        for i in (1, 4, 5, 6, 7, 8, 9):
            expected[i] = 0.30 / 7
        np.testing.assert_allclose(lab.probs, expected, atol=1e-12)

    def test_t1_unif(self, space10):
        """T1 with uniform spread: 30% over the 9 non-top classes."""
        lab = construct_label(self.record(), space10, LabelVariety.T1_UNIF, UNIF)
        expected = np.full(10, 0.30 / 9)
        expected[3] = 0.70
        np.testing.assert_allclose(lab.probs, expected, atol=1e-12)

    def test_select_top2(self, space10):
        """Probabilities are discarded: equal mass on the two chosen classes."""
        lab = construct_label(self.record(), space10, LabelVariety.SELECT_TOP2, CLAMP)
        expected = np.zeros(10)
        expected[3] = 0.5
        expected[5] = 0.5
        np.testing.assert_allclose(lab.probs, expected, atol=1e-12)

    def test_select_top2_single_choice(self, space10):
        """Without a second choice the whole mass sits on the first."""
        rec = make_record(top1=3, p1=70.0, definitely_not=(2,))
        lab = construct_label(rec, space10, LabelVariety.SELECT_TOP2, CLAMP)
        assert lab.probs[3] == 1.0
        assert lab.probs.sum() == 1.0


class TestClampEdgeCases:
    """Saturated, overspecified, and fully-excluded responses."""

    def test_gamma_reserve_when_mass_saturated(self, space10):
        """Stated 80+20 covers everything, so gamma mass goes to the rest."""
        rec = make_record(top1=3, p1=80.0, top2=5, p2=20.0, definitely_not=(2,))
        lab = construct_label(rec, space10, LabelVariety.T2_CLAMP, CLAMP)
        # 7 eligible classes share gamma*100 = 10 points; total mass 110
        expected = np.full(10, (10.0 / 7) / 110.0)
        expected[3] = 80.0 / 110.0
        expected[5] = 20.0 / 110.0
        expected[2] = 0.0
        np.testing.assert_allclose(lab.probs, expected, atol=1e-12)

    def test_gamma_zero_keeps_stated_mass_exact(self, space10):
        """With gamma=0 a saturated response normalizes to the stated split."""
        rec = make_record(top1=3, p1=80.0, top2=5, p2=20.0)
        policy = RedistributionPolicy(mode=RedistributionMode.CLAMP, gamma=0.0)
        lab = construct_label(rec, space10, LabelVariety.T2_CLAMP, policy)
        expected = np.zeros(10)
        expected[3] = 0.8
        expected[5] = 0.2
        np.testing.assert_allclose(lab.probs, expected, atol=1e-12)

    def test_overspecified_sum_normalizes(self, space10):
        """p1+p2 > 100 leaves no leftover; normalization rescales the total."""
        rec = make_record(top1=3, p1=80.0, top2=5, p2=30.0, definitely_not=(0, 1))
        policy = RedistributionPolicy(mode=RedistributionMode.CLAMP, gamma=0.0)
        lab = construct_label(rec, space10, LabelVariety.T2_CLAMP, policy)
        np.testing.assert_allclose(lab.probs[3], 80.0 / 110.0, atol=1e-12)
        np.testing.assert_allclose(lab.probs[5], 30.0 / 110.0, atol=1e-12)
        np.testing.assert_allclose(lab.probs.sum(), 1.0, atol=1e-12)

    def test_everything_excluded_drops_leftover(self, space10):
        """When every other class is excluded the leftover mass vanishes."""
        rec = make_record(top1=3, p1=60.0, definitely_not=tuple(i for i in range(10) if i != 3))
        lab = construct_label(rec, space10, LabelVariety.T1_CLAMP, CLAMP)
        expected = np.zeros(10)
        expected[3] = 1.0
        np.testing.assert_allclose(lab.probs, expected, atol=1e-12)

    def test_t2_without_second_choice_degrades_to_t1(self, space10):
        """A skipped second slot makes T2 and T1 construction identical."""
        rec = make_record(top1=3, p1=70.0, definitely_not=(2, 0))
        t2 = construct_label(rec, space10, LabelVariety.T2_CLAMP, CLAMP)
        t1 = construct_label(rec, space10, LabelVariety.T1_CLAMP, CLAMP)
        np.testing.assert_allclose(t2.probs, t1.probs, atol=0)

    def test_missing_p1_raises(self, space10):
        rec = make_record(top1=3)
        with pytest.raises(ValueError, match="no probability"):
            construct_label(rec, space10, LabelVariety.T1_UNIF, UNIF)

    def test_aggregated_variety_rejected(self, space10):
        rec = make_record(top1=3, p1=70.0)
        with pytest.raises(ValueError, match="does not handle"):
            construct_label(rec, space10, LabelVariety.MULTI_AGG, CLAMP)

    def test_out_of_space_index_raises(self, space4):
        rec = make_record(top1=7, p1=70.0)
        with pytest.raises(ValueError, match="outside"):
            construct_label(rec, space4, LabelVariety.T1_UNIF, UNIF)


def _record_strategy(k: int):
    grid = st.sampled_from([float(v) for v in range(0, 101, 5)])
    return st.tuples(
        st.integers(0, k - 1),
        grid,
        st.one_of(st.none(), st.integers(0, k - 1)),
        grid,
        st.lists(st.integers(0, k - 1), max_size=k),
    )


class TestConstructProperties:
    """Simplex invariants over randomized elicitation responses."""

    @settings(max_examples=200, deadline=None)
    @given(data=_record_strategy(10), variety=st.sampled_from(ELICITED_VARIETIES))
    def test_labels_live_on_the_simplex(self, data, variety):
        """Every constructed label is nonnegative and sums to one."""
        top1, p1, top2, p2, dn = data
        if top2 == top1:
            top2 = None
        rec = make_record(
            top1=top1,
            p1=p1,
            top2=top2,
            p2=p2 if top2 is not None else None,
            definitely_not=set(dn) - {top1} - ({top2} if top2 is not None else set()),
        )
        policy = RedistributionPolicy(
            mode=RedistributionMode.CLAMP
            if "clamp" in variety.value
            else RedistributionMode.UNIFORM,
            gamma=0.1,
        )
        try:
            lab = construct_label(rec, SPACE10, variety, policy)
        except ValueError as exc:
            # the only legitimate failure: all mass zero before normalizing
            assert "mass" in str(exc)
            return
        assert np.all(lab.probs >= 0.0)
        np.testing.assert_allclose(lab.probs.sum(), 1.0, atol=1e-12)

    @settings(max_examples=200, deadline=None)
    @given(data=_record_strategy(10))
    def test_clamp_keeps_excluded_classes_at_zero(self, data):
        """CLAMP varieties place no mass on definitely-not classes."""
        top1, p1, top2, p2, dn = data
        if top2 == top1:
            top2 = None
        excluded = set(dn) - {top1} - ({top2} if top2 is not None else set())
        rec = make_record(
            top1=top1,
            p1=p1,
            top2=top2,
            p2=p2 if top2 is not None else None,
            definitely_not=excluded,
        )
        for variety in (LabelVariety.T1_CLAMP, LabelVariety.T2_CLAMP):
            try:
                lab = construct_label(rec, SPACE10, variety, CLAMP)
            except ValueError as exc:
                assert "mass" in str(exc)
                continue
            for i in excluded:
                assert lab.probs[i] == 0.0

    def test_unif_puts_mass_on_excluded_classes(self, space10):
        """UNIF varieties deliberately ignore the definitely-not set."""
        rec = make_record(top1=3, p1=70.0, definitely_not=(0, 2))
        lab = construct_label(rec, space10, LabelVariety.T1_UNIF, UNIF)
        assert lab.probs[0] > 0.0
        assert lab.probs[2] > 0.0


class TestAggregation:
    """Exact recovery identities for both aggregation styles."""

    def test_mean_aggregate_recovers_member_average(self, space10):
        """The pooled label is entrywise (1/M) * sum of member labels."""
        rng = np.random.default_rng(42)
        members = []
        for j in range(7):
            probs = rng.dirichlet(np.ones(10))
            members.append(SoftLabel(probs, LabelVariety.T2_CLAMP, f"a{j}"))
        agg = aggregate_mean(members)
        stacked = np.stack([m.probs for m in members])
        np.testing.assert_array_equal(agg.probs, stacked.sum(axis=0) / 7)
        assert agg.variety is LabelVariety.OURS_AGG

    def test_vote_aggregate_recovers_count_fractions(self):
        """Vote aggregation is exactly counts divided by the vote total."""
        counts = np.array([3.0, 0.0, 2.0, 1.0])
        agg = multi_aggregate(counts)
        np.testing.assert_array_equal(agg.probs, counts / 6.0)
        assert agg.variety is LabelVariety.MULTI_AGG

    def test_aggregate_of_identical_labels_is_identity(self, space10):
        lab = baseline_label(LabelVariety.RANDOM, space10, seed=7)
        agg = aggregate_mean([lab, lab, lab])
        np.testing.assert_allclose(agg.probs, lab.probs, atol=1e-15)

    def test_empty_aggregate_raises(self):
        with pytest.raises(ValueError, match="empty"):
            aggregate_mean([])

    def test_mismatched_sizes_raise(self, space10, space4):
        a = baseline_label(LabelVariety.UNIFORM, space10)
        b = baseline_label(LabelVariety.UNIFORM, space4)
        with pytest.raises(ValueError, match="disagree"):
            aggregate_mean([a, b])

    def test_vote_aggregate_rejects_bad_counts(self):
        with pytest.raises(ValueError, match="nonnegative"):
            multi_aggregate([-1.0, 2.0])
        with pytest.raises(ValueError, match="at least 1"):
            multi_aggregate([0.0, 0.0])


class TestBaselines:
    """Reference labels: one-hot, uniform, random, and smoothed."""

    def test_hard_label_is_one_hot(self, space10):
        lab = hard_label(4, space10)
        assert lab.probs[4] == 1.0
        assert lab.probs.sum() == 1.0
        assert np.count_nonzero(lab.probs) == 1

    def test_uniform_baseline(self, space10):
        lab = baseline_label(LabelVariety.UNIFORM, space10)
        np.testing.assert_allclose(lab.probs, np.full(10, 0.1), atol=1e-15)

    def test_random_baseline_is_seed_deterministic(self, space10):
        a = baseline_label(LabelVariety.RANDOM, space10, seed=3)
        b = baseline_label(LabelVariety.RANDOM, space10, seed=3)
        c = baseline_label(LabelVariety.RANDOM, space10, seed=4)
        np.testing.assert_array_equal(a.probs, b.probs)
        assert not np.array_equal(a.probs, c.probs)

    def test_smoothing_blends_toward_uniform(self, space10):
        """beta=0.05 gives 0.955 on the hot class and 0.005 elsewhere."""
        lab = smooth_labels(hard_label(2, space10), 0.05, space10)
        expected = np.full(10, 0.005)
        expected[2] = 0.955
        np.testing.assert_allclose(lab.probs, expected, atol=1e-12)

    def test_smoothing_requires_one_hot(self, space10):
        soft = baseline_label(LabelVariety.UNIFORM, space10)
        with pytest.raises(ValueError, match="one-hot"):
            smooth_labels(soft, 0.05, space10)

    def test_softmax_smoothing_flattens(self, space10):
        lab = hard_label(2, space10)
        warm = softmax_smooth(lab, temperature=1.0)
        hot = softmax_smooth(lab, temperature=0.1)
        assert warm.probs[2] < hot.probs[2]
        np.testing.assert_allclose(warm.probs.sum(), 1.0, atol=1e-12)

    def test_baseline_rejects_other_varieties(self, space10):
        with pytest.raises(ValueError, match="UNIFORM and RANDOM"):
            baseline_label(LabelVariety.HARD, space10)


class TestLabelPool:
    """Pool construction and the aggregate-consistency invariant."""

    def test_from_members_builds_the_mean(self, space10):
        rng = np.random.default_rng(42)
        members = [
            SoftLabel(rng.dirichlet(np.ones(10)), LabelVariety.T2_CLAMP, f"a{j}")
            for j in range(4)
        ]
        pool = LabelPool.from_members("img-1", members)
        assert pool.m == 4
        np.testing.assert_array_equal(
            pool.aggregate.probs, np.stack([m.probs for m in members]).sum(axis=0) / 4
        )

    def test_inconsistent_aggregate_rejected(self, space10):
        members = [hard_label(0, space10, "a"), hard_label(1, space10, "b")]
        wrong = hard_label(2, space10)
        with pytest.raises(ValueError, match="not the mean"):
            LabelPool(image_id="img-1", per_annotator=tuple(members), aggregate=wrong)

    def test_empty_pool_rejected(self, space10):
        with pytest.raises(ValueError, match="empty list of labels"):
            LabelPool.from_members("img-1", [])


class TestValidation:
    """Constructor guards on labels, records, spaces, and policies."""

    def test_soft_label_must_sum_to_one(self):
        with pytest.raises(ValueError, match="sum"):
            SoftLabel(np.array([0.5, 0.4]), LabelVariety.HARD, "x")

    def test_soft_label_rejects_negative_mass(self):
        with pytest.raises(ValueError, match=r"\[0, 1\]"):
            SoftLabel(np.array([1.2, -0.2]), LabelVariety.HARD, "x")

    def test_soft_label_rejects_matrices(self):
        with pytest.raises(ValueError, match="1-D"):
            SoftLabel(np.full((2, 2), 0.25), LabelVariety.HARD, "x")

    def test_argmax_ties_resolve_low(self):
        lab = SoftLabel(np.array([0.4, 0.4, 0.2]), LabelVariety.HARD, "x")
        assert lab.argmax() == 0

    def test_record_p2_requires_top2(self):
        with pytest.raises(ValueError, match="p2"):
            make_record(top1=0, p1=50.0, p2=30.0)

    def test_record_choices_must_differ(self):
        with pytest.raises(ValueError, match="different"):
            make_record(top1=0, p1=50.0, top2=0, p2=30.0)

    def test_record_negative_elapsed_rejected(self):
        with pytest.raises(ValueError, match="nonnegative"):
            make_record(top1=0, p1=50.0, elapsed_seconds=-1.0)

    def test_space_needs_distinct_names(self):
        with pytest.raises(ValueError, match="distinct"):
            LabelSpace(names=("a", "a", "b"))

    def test_space_needs_two_classes(self):
        with pytest.raises(ValueError, match="at least 2"):
            LabelSpace(names=("solo",))

    def test_space_lookup(self, space4):
        assert space4.k == 4
        assert space4.index_of("c") == 2
        with pytest.raises(ValueError, match="unknown class"):
            space4.index_of("nope")

    def test_policy_gamma_bounds(self):
        with pytest.raises(ValueError, match="gamma"):
            RedistributionPolicy(gamma=1.5)

    def test_variety_from_string(self):
        assert LabelVariety.from_string("T2_CLAMP") is LabelVariety.T2_CLAMP
        assert LabelVariety.from_string("select-top2") is LabelVariety.SELECT_TOP2
        with pytest.raises(ValueError, match="unknown"):
            LabelVariety.from_string("t9")
