"""Anchor selection: determinism, tie rules, and agreement with brute force."""

import numpy as np
import pytest

from heatdec import (
    AnchorSet,
    ConfigurationError,
    DomainError,
    DistanceMap,
    EncodingConfig,
    Heatmap,
    Landmark,
    anchor_mask,
    distance_transform,
    encode_unbiased,
    select_anchors,
    top_k_anchors,
)
from heatdec.anchors import top_k_cells
from heatdec.decoders import _batch_topk


def brute_force_order(values: np.ndarray) -> np.ndarray:
    """All cells sorted by (activation desc, row-major index asc)."""
    flat = values.ravel()
    return np.lexsort((np.arange(flat.size), -flat))


def encoded_pair(u=10.37, v=22.81, lam=8, sigma=2.0, side=8):
    cfg = EncodingConfig(downsample=lam, sigma=sigma, heatmap_h=side, heatmap_w=side)
    h = encode_unbiased(Landmark(u, v), cfg)
    return h, distance_transform(h, sigma)


class TestSelectAnchors:
    def test_single_peak_k1(self):
        values = np.zeros((3, 3))
        values[1, 1] = 1.0
        h = Heatmap(values)
        d = distance_transform(h, 2.0)
        aset = select_anchors(h, d, 1)
        a = aset.anchors[0]
        assert (a.x, a.y, a.d) == (1, 1, 0.0)

    def test_matches_full_sort_oracle(self):
        h, d = encoded_pair()
        aset = select_anchors(h, d, 10)
        expected = brute_force_order(h.values)[:10]
        got = [a.y * 8 + a.x for a in aset.anchors]
        assert got == expected.tolist()

    def test_uniform_map_takes_first_row_major(self):
        h = Heatmap(np.full((3, 3), 0.5))
        d = distance_transform(h, 2.0)
        aset = select_anchors(h, d, 4)
        cells = [(a.y, a.x) for a in aset.anchors]
        assert cells == [(0, 0), (0, 1), (0, 2), (1, 0)]

    def test_rank_consistency(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            values = rng.uniform(0, 1, (7, 5))
            h = Heatmap(values)
            d = distance_transform(h, 2.0)
            for k in (1, 3, 10, 35):
                aset = select_anchors(h, d, k)
                selected = {(a.y, a.x) for a in aset.anchors}
                kth = min(a.activation for a in aset.anchors)
                for i in range(7):
                    for j in range(5):
                        if (i, j) not in selected:
                            assert values[i, j] <= kth

    def test_noiseless_geometry_matches_distance_rank(self):
        h, d = encoded_pair()
        aset = select_anchors(h, d, 10)
        cu, cv = 10.37 / 8, 22.81 / 8
        jj, ii = np.meshgrid(np.arange(8), np.arange(8))
        true_r = np.hypot(jj - cu, ii - cv).ravel()
        nearest = set(np.argsort(true_r, kind="stable")[:10].tolist())
        got = {a.y * 8 + a.x for a in aset.anchors}
        assert got == nearest

    def test_dimension_mismatch_rejected(self):
        h = Heatmap(np.ones((3, 3)))
        d = DistanceMap(np.zeros((3, 4)), sigma=2.0)
        with pytest.raises(DomainError):
            select_anchors(h, d, 1)

    def test_k_out_of_range_rejected(self):
        h = Heatmap(np.ones((2, 2)))
        d = distance_transform(h, 2.0)
        with pytest.raises(ConfigurationError):
            select_anchors(h, d, 0)
        with pytest.raises(ConfigurationError):
            select_anchors(h, d, 5)

    def test_fast_path_equals_transform_path(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            values = rng.uniform(0, 1, (9, 9))
            h = Heatmap(values)
            via_map = select_anchors(h, distance_transform(h, 2.0), 6)
            direct = top_k_anchors(h, 2.0, 6)
            assert via_map == direct


class TestAnchorMask:
    def test_total_selection_all_ones(self):
        h = Heatmap(np.random.default_rng(0).uniform(0, 1, (4, 4)))
        mask = anchor_mask(h, 16)
        assert mask.sum() == 16
        assert (mask == 1.0).all()

    def test_k1_is_one_hot_at_argmax(self):
        values = np.zeros((3, 4))
        values[2, 1] = 0.7
        mask = anchor_mask(Heatmap(values), 1)
        assert mask.sum() == 1
        assert mask[2, 1] == 1.0

    def test_mask_agrees_with_selection(self):
        h, d = encoded_pair()
        mask = anchor_mask(h, 10)
        assert mask.sum() == 10
        aset = select_anchors(h, d, 10)
        for a in aset.anchors:
            assert mask[a.y, a.x] == 1.0

    def test_mask_agreement_under_ties(self):
        # quantized values force plateaus at the selection boundary
        rng = np.random.default_rng(9)
        for _ in range(10):
            values = rng.integers(0, 4, (5, 5)) / 4.0
            h = Heatmap(values)
            d = distance_transform(h, 2.0)
            for k in (1, 5, 12, 25):
                mask = anchor_mask(h, k)
                aset = select_anchors(h, d, k)
                assert mask.sum() == k
                cells = {(a.y, a.x) for a in aset.anchors}
                assert {(i, j) for i, j in zip(*np.nonzero(mask))} == cells


class TestBatchTopK:
    def test_matches_per_item_on_random_maps(self):
        rng = np.random.default_rng(21)
        maps = rng.uniform(0, 1, (40, 6, 7))
        flat = maps.reshape(40, -1)
        sel, val, ok = _batch_topk(flat, 8)
        assert ok.all()
        for i in range(40):
            idx_i, val_i = top_k_cells(maps[i], 8)
            assert np.array_equal(sel[i], idx_i)
            assert np.array_equal(val[i], val_i)

    def test_matches_per_item_with_ties(self):
        rng = np.random.default_rng(22)
        maps = rng.integers(0, 3, (30, 5, 5)) / 3.0
        flat = maps.reshape(30, -1)
        for k in (1, 4, 10):
            sel, val, _ = _batch_topk(flat, k)
            for i in range(30):
                idx_i, val_i = top_k_cells(maps[i], k)
                assert np.array_equal(sel[i], idx_i)
                assert np.array_equal(val[i], val_i)

    def test_flags_invalid_rows(self):
        maps = np.ones((4, 3, 3))
        maps[1, 0, 0] = np.nan
        maps[2, 1, 1] = -0.5
        maps[3] = 0.0  # finite but no positive activation
        _, _, ok = _batch_topk(maps.reshape(4, -1), 2)
        assert ok.tolist() == [True, False, False, False]


class TestAnchorSetSerialization:
    def test_json_roundtrip(self):
        h, d = encoded_pair()
        aset = select_anchors(h, d, 5)
        text = aset.to_json()
        back = AnchorSet.from_json(text, aset.source_dims)
        assert back == aset

    def test_distinct_cells_enforced(self):
        from heatdec import Anchor

        with pytest.raises(DomainError):
            AnchorSet(
                anchors=(Anchor(0, 0, 1.0, 0.5), Anchor(0, 0, 2.0, 0.4)),
                source_dims=(3, 3),
            )
