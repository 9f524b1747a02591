import numpy as np
import pytest
import torch

from amcontrast.augment import AugmentPolicy
from amcontrast.pairing import (PositiveRelation, SegmentViewBatch,
                                enumerate_positives, flat_index, make_views,
                                split_segments)

IDENTITY = AugmentPolicy(activation_prob=0.0)
INVERT = AugmentPolicy(ops=("invert",), activation_prob=1.0)


def batch_of(b=3, t=128, seed=0):
    return np.random.default_rng(seed).normal(size=(b, 2, t))


class TestSplit:
    def test_even_halves(self):
        lead, trail = split_segments(np.zeros((2, 128)))
        assert lead.shape[-1] == 64 and trail.shape[-1] == 64

    def test_odd_extra_sample_trails(self):
        x = np.arange(7)[None, :].repeat(2, axis=0)
        lead, trail = split_segments(x)
        assert lead.shape[-1] == 3 and trail.shape[-1] == 4
        assert trail[0, 0] == 3


class TestMakeViews:
    def test_identity_views_match_raw_split(self):
        x = batch_of()
        views = make_views(x, IDENTITY, IDENTITY,
                           np.random.default_rng(0), np.random.default_rng(1))
        for n in range(3):
            lead, trail = split_segments(x[n])
            for v in (0, 1):
                assert np.array_equal(views.segment(n, v, 0), lead)
                assert np.array_equal(views.segment(n, v, 1), trail)

    def test_segments_concatenate_to_view(self):
        x = batch_of()
        views = make_views(x, IDENTITY, INVERT,
                           np.random.default_rng(0), np.random.default_rng(1))
        whole = np.concatenate([views.segment(1, 1, 0), views.segment(1, 1, 1)], -1)
        assert np.array_equal(whole, -x[1])

    def test_views_differ_under_stochastic_policies(self):
        x = batch_of()
        policy = AugmentPolicy(ops=("rotate",), activation_prob=1.0)
        views = make_views(x, policy, policy,
                           np.random.default_rng(0), np.random.default_rng(1))
        assert not np.allclose(views.segment(0, 0, 0), views.segment(0, 1, 0))

    def test_deterministic_given_streams(self):
        x = batch_of()
        policy = AugmentPolicy()
        a = make_views(x, policy, policy, np.random.default_rng(4),
                       np.random.default_rng(5))
        b = make_views(x, policy, policy, np.random.default_rng(4),
                       np.random.default_rng(5))
        assert np.array_equal(a.seg_lead, b.seg_lead)
        assert np.array_equal(a.seg_trail, b.seg_trail)

    def test_origin_ids_default(self):
        views = make_views(batch_of(4), IDENTITY, IDENTITY,
                           np.random.default_rng(0), np.random.default_rng(1))
        assert views.origin_ids.tolist() == [0, 1, 2, 3]
        assert views.corruption_log is None

    def test_heterogeneous_lengths_rejected(self):
        items = [np.zeros((2, 16)), np.zeros((2, 17))]
        with pytest.raises(ValueError, match="heterogeneous"):
            make_views(items, IDENTITY, IDENTITY,
                       np.random.default_rng(0), np.random.default_rng(1))

    def test_segment_len_truncates_leading(self):
        x = batch_of(t=128)
        views = make_views(x, IDENTITY, IDENTITY, np.random.default_rng(0),
                           np.random.default_rng(1), segment_len=16)
        assert views.seg_lead.shape[-1] == 16
        assert views.seg_trail.shape[-1] == 16
        assert np.array_equal(views.segment(0, 0, 0), x[0, :, :16])
        assert np.array_equal(views.segment(0, 0, 1), x[0, :, 16:32])

    def test_segment_len_random_crop(self):
        x = batch_of(t=128)
        views = make_views(x, IDENTITY, IDENTITY, np.random.default_rng(0),
                           np.random.default_rng(1), segment_len=8,
                           random_crop=True, crop_rng=np.random.default_rng(9))
        again = make_views(x, IDENTITY, IDENTITY, np.random.default_rng(0),
                           np.random.default_rng(1), segment_len=8,
                           random_crop=True, crop_rng=np.random.default_rng(9))
        assert np.array_equal(views.seg_lead, again.seg_lead)
        # the crop window still comes from the instance itself
        row = views.segment(2, 0, 0)[0]
        hay = x[2, 0]
        assert any(np.array_equal(hay[s:s + 8], row) for s in range(121))

    def test_segment_len_too_large(self):
        with pytest.raises(ValueError):
            make_views(batch_of(t=64), IDENTITY, IDENTITY,
                       np.random.default_rng(0), np.random.default_rng(1),
                       segment_len=40)

    def test_random_crop_needs_rng(self):
        with pytest.raises(ValueError):
            make_views(batch_of(), IDENTITY, IDENTITY, np.random.default_rng(0),
                       np.random.default_rng(1), segment_len=8, random_crop=True)


class TestEnumeratePositives:
    def test_single_instance_has_five(self):
        rels = enumerate_positives(1)
        assert len(rels) == 5
        assert sum(r.tier == "ac" for r in rels) == 2
        assert sum(r.tier == "sc" for r in rels) == 2
        assert sum(r.tier == "jc" for r in rels) == 1

    @pytest.mark.parametrize("b", [2, 3, 8])
    def test_counts_scale_linearly(self, b):
        rels = enumerate_positives(b)
        assert len(rels) == 5 * b
        assert sum(r.tier == "ac" for r in rels) == 2 * b
        assert sum(r.tier == "sc" for r in rels) == 2 * b
        assert sum(r.tier == "jc" for r in rels) == b

    def test_tier_geometry(self):
        for r in enumerate_positives(4):
            (n, v, s), (m, w, t) = r.anchor, r.positive
            assert n == m, "positives never cross instances"
            if r.tier == "ac":
                assert v == 0 and w == 1 and s == t
            elif r.tier == "sc":
                assert v == w and s == 0 and t == 1
            else:
                assert (v, s) == (0, 0) and (w, t) == (1, 1)

    def test_asymmetric_by_default(self):
        rels = enumerate_positives(2)
        keys = {(r.anchor, r.positive) for r in rels}
        for r in rels:
            assert (r.positive, r.anchor) not in keys

    def test_symmetric_flag_mirrors(self):
        rels = enumerate_positives(2, symmetric=True)
        assert len(rels) == 20
        keys = {(r.tier, r.anchor, r.positive) for r in rels}
        for r in rels:
            assert (r.tier, r.positive, r.anchor) in keys

    def test_rejects_empty_batch(self):
        with pytest.raises(ValueError):
            enumerate_positives(0)


class TestFlatIndex:
    def test_matches_reshape_order(self):
        h = torch.arange(3 * 2 * 2 * 5, dtype=torch.float64).reshape(3, 2, 2, 5)
        flat = h.reshape(-1, 5)
        for n in range(3):
            for v in (0, 1):
                for s in (0, 1):
                    assert torch.equal(flat[flat_index(n, v, s)], h[n, v, s])
