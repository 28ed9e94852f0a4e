"""Encoding and distance-transform behavior, checked against scalar oracles."""

import math

import numpy as np
import pytest

from heatdec import (
    ACTIVATION_FLOOR,
    ConfigurationError,
    DomainError,
    EncodingConfig,
    EncodingMode,
    Heatmap,
    Landmark,
    distance_transform,
    encode,
    encode_biased,
    encode_unbiased,
    read_heatmap,
    read_heatmap_json,
    write_heatmap,
    write_heatmap_json,
)


def scalar_gaussian(i: int, j: int, cu: float, cv: float, sigma: float) -> float:
    """Independently coded per-cell Gaussian: the encoding oracle."""
    r2 = (j - cu) ** 2 + (i - cv) ** 2
    return math.exp(-r2 / (2.0 * sigma * sigma))


class TestUnbiasedEncoding:
    def test_origin_landmark_exact_values(self):
        cfg = EncodingConfig(downsample=1, sigma=1.0, heatmap_h=3, heatmap_w=3)
        h = encode_unbiased(Landmark(0.0, 0.0), cfg)
        assert h.values[0, 0] == 1.0
        assert h.values[0, 1] == pytest.approx(math.exp(-0.5), abs=1e-15)
        assert h.values[1, 1] == pytest.approx(math.exp(-1.0), abs=1e-15)

    def test_on_node_center_has_unit_peak(self):
        cfg = EncodingConfig(downsample=4, sigma=2.0, heatmap_h=4, heatmap_w=4)
        h = encode_unbiased(Landmark(8.0, 8.0), cfg)
        assert h.values[2, 2] == 1.0
        assert h.values.max() == 1.0
        assert np.unravel_index(h.values.argmax(), h.values.shape) == (2, 2)

    def test_every_cell_matches_scalar_oracle(self):
        cfg = EncodingConfig(downsample=8, sigma=2.0, heatmap_h=8, heatmap_w=8)
        h = encode_unbiased(Landmark(10.37, 22.81), cfg)
        cu, cv = 10.37 / 8, 22.81 / 8
        for i in range(8):
            for j in range(8):
                assert h.values[i, j] == pytest.approx(
                    scalar_gaussian(i, j, cu, cv, 2.0), rel=1e-14
                )

    def test_deterministic_bit_identical(self):
        cfg = EncodingConfig(downsample=8, sigma=2.0, heatmap_h=16, heatmap_w=16)
        a = encode_unbiased(Landmark(33.3, 71.9), cfg)
        b = encode_unbiased(Landmark(33.3, 71.9), cfg)
        assert np.array_equal(a.values, b.values)

    def test_fresh_map_invariants(self):
        cfg = EncodingConfig(downsample=8, sigma=2.0, heatmap_h=16, heatmap_w=16)
        h = encode_unbiased(Landmark(5.0, 100.0), cfg)
        assert h.values.max() <= 1.0
        assert h.values.max() > 0.0
        assert (h.values >= 0).all()

    def test_out_of_bounds_landmark_rejected(self):
        cfg = EncodingConfig(downsample=4, sigma=2.0, heatmap_h=4, heatmap_w=4)
        with pytest.raises(DomainError):
            encode_unbiased(Landmark(16.0, 0.0), cfg)  # u == image_w
        with pytest.raises(DomainError):
            encode_unbiased(Landmark(0.0, -0.1), cfg)

    def test_invalid_config_rejected(self):
        with pytest.raises(ConfigurationError):
            EncodingConfig(downsample=8, sigma=0.0, heatmap_h=8, heatmap_w=8)
        with pytest.raises(ConfigurationError):
            EncodingConfig(downsample=0, sigma=2.0, heatmap_h=8, heatmap_w=8)
        with pytest.raises(ConfigurationError):
            EncodingConfig(downsample=8, sigma=2.0, heatmap_h=0, heatmap_w=8)


class TestBiasedEncoding:
    def test_quantized_center_unit_peak(self):
        cfg = EncodingConfig(downsample=8, sigma=2.0, heatmap_h=8, heatmap_w=8)
        h = encode_biased(Landmark(10.37, 22.81), cfg)
        # 10.37/8 = 1.296 -> 1, 22.81/8 = 2.851 -> 3
        assert h.values[3, 1] == 1.0
        assert np.unravel_index(h.values.argmax(), h.values.shape) == (3, 1)

    def test_half_rounds_up(self):
        cfg = EncodingConfig(downsample=8, sigma=2.0, heatmap_h=8, heatmap_w=8)
        h = encode_biased(Landmark(4.0, 4.0), cfg)  # 0.5 per axis
        assert h.values[1, 1] == 1.0

    def test_on_node_matches_unbiased(self):
        cfg = EncodingConfig(downsample=4, sigma=2.0, heatmap_h=4, heatmap_w=4)
        b = encode_biased(Landmark(8.0, 8.0), cfg)
        u = encode_unbiased(Landmark(8.0, 8.0), cfg)
        assert np.array_equal(b.values, u.values)

    def test_mean_quantization_error_quarter_pixel(self):
        # uniform rounding error has mean |err| = 0.25 heatmap px per axis;
        # inset-margin landmarks keep the quantizer away from the edge clamp
        from heatdec import gen_landmarks

        lam = 8
        side = 80  # inset spans [8, 72] heatmap px: a whole number of cells
        landmarks = gen_landmarks(10000, (side * lam, side * lam), seed=42)
        us = np.array([lm.u for lm in landmarks]) / lam
        vs = np.array([lm.v for lm in landmarks]) / lam
        err_u = np.abs(us - np.floor(us + 0.5))
        err_v = np.abs(vs - np.floor(vs + 0.5))
        assert np.mean(err_u) == pytest.approx(0.25, abs=0.005)
        assert np.mean(err_v) == pytest.approx(0.25, abs=0.005)
        # the rounding oracle above is exactly what encode_biased realizes
        cfg = EncodingConfig(downsample=lam, sigma=2.0, heatmap_h=side, heatmap_w=side)
        for lm in landmarks[:100]:
            peak = np.unravel_index(encode_biased(lm, cfg).values.argmax(), (side, side))
            assert peak == (np.floor(lm.v / lam + 0.5), np.floor(lm.u / lam + 0.5))

    def test_mode_dispatch(self):
        cfg_b = EncodingConfig(8, 2.0, 8, 8, EncodingMode.BIASED)
        cfg_u = EncodingConfig(8, 2.0, 8, 8, EncodingMode.UNBIASED)
        lm = Landmark(10.37, 22.81)
        assert np.array_equal(encode(lm, cfg_b).values, encode_biased(lm, cfg_b).values)
        assert np.array_equal(encode(lm, cfg_u).values, encode_unbiased(lm, cfg_u).values)


class TestDistanceTransform:
    def test_unit_activation_is_zero_range(self):
        h = Heatmap(np.array([[1.0, 0.5], [0.25, 0.125]]))
        d = distance_transform(h, 2.0)
        assert d.values[0, 0] == 0.0

    def test_inverse_of_gaussian(self):
        h = Heatmap(np.array([[math.exp(-1.0)]]))
        d = distance_transform(h, 2.0)
        assert d.values[0, 0] == pytest.approx(math.sqrt(8.0), abs=1e-12)

    def test_roundtrip_recovers_true_distances(self):
        cfg = EncodingConfig(downsample=8, sigma=2.0, heatmap_h=8, heatmap_w=8)
        h = encode_unbiased(Landmark(10.37, 22.81), cfg)
        d = distance_transform(h, 2.0)
        cu, cv = 10.37 / 8, 22.81 / 8
        jj, ii = np.meshgrid(np.arange(8), np.arange(8))
        true_r = np.hypot(jj - cu, ii - cv)
        above = h.values > ACTIVATION_FLOOR
        assert np.abs(d.values[above] - true_r[above]).max() < 1e-9

    def test_monotonicity(self):
        rng = np.random.default_rng(3)
        h = Heatmap(rng.uniform(1e-6, 1.0, (6, 6)))
        d = distance_transform(h, 2.0)
        hv = h.values.ravel()
        dv = d.values.ravel()
        for a in range(hv.size):
            for b in range(hv.size):
                if hv[a] > hv[b]:
                    assert dv[a] < dv[b]

    def test_floor_keeps_ranges_finite(self):
        h = Heatmap(np.array([[1.0, 0.0]]))
        d = distance_transform(h, 2.0)
        assert np.isfinite(d.values).all()
        expected = math.sqrt(-8.0 * math.log(ACTIVATION_FLOOR))
        assert d.values[0, 1] == pytest.approx(expected, rel=1e-12)

    def test_activations_above_one_clamp_to_zero_range(self):
        h = Heatmap(np.array([[2.0, 0.5]]))
        d = distance_transform(h, 2.0)
        assert d.values[0, 0] == 0.0

    def test_invalid_sigma_rejected(self):
        h = Heatmap(np.ones((2, 2)))
        with pytest.raises(ConfigurationError):
            distance_transform(h, 0.0)
        with pytest.raises(ConfigurationError):
            distance_transform(h, -1.0)


class TestHeatmapValidation:
    def test_rejects_non_finite(self):
        with pytest.raises(DomainError):
            Heatmap(np.array([[1.0, np.nan]]))
        with pytest.raises(DomainError):
            Heatmap(np.array([[np.inf, 0.0]]))

    def test_rejects_negative(self):
        with pytest.raises(DomainError):
            Heatmap(np.array([[-0.1, 0.0]]))

    def test_rejects_wrong_rank(self):
        with pytest.raises(DomainError):
            Heatmap(np.ones(4))


class TestSerialization:
    def test_binary_roundtrip_bit_exact(self, tmp_path):
        cfg = EncodingConfig(downsample=8, sigma=2.0, heatmap_h=8, heatmap_w=8)
        h = encode_unbiased(Landmark(10.37, 22.81), cfg)
        path = tmp_path / "map.hmap"
        write_heatmap(path, h)
        loaded, header = read_heatmap(path)
        assert np.array_equal(loaded.values, h.values)
        assert (header.h, header.w) == (8, 8)
        assert header.sigma == 2.0
        assert header.downsample == 8.0
        assert loaded.meta is None

    def test_json_roundtrip(self, tmp_path):
        cfg = EncodingConfig(downsample=4, sigma=1.5, heatmap_h=3, heatmap_w=5)
        h = encode_unbiased(Landmark(7.7, 3.2), cfg)
        path = tmp_path / "map.json"
        write_heatmap_json(path, h)
        loaded, header = read_heatmap_json(path)
        assert np.array_equal(loaded.values, h.values)
        assert header.downsample == 4.0

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.hmap"
        path.write_bytes(b"XXXX" + bytes(28))
        with pytest.raises(DomainError):
            read_heatmap(path)

    def test_truncated_rejected(self, tmp_path):
        cfg = EncodingConfig(downsample=1, sigma=1.0, heatmap_h=4, heatmap_w=4)
        h = encode_unbiased(Landmark(1.0, 1.0), cfg)
        path = tmp_path / "map.hmap"
        write_heatmap(path, h)
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(DomainError):
            read_heatmap(path)

    def test_explicit_header_for_external_maps(self, tmp_path):
        h = Heatmap(np.ones((2, 2)))
        path = tmp_path / "map.hmap"
        with pytest.raises(DomainError):
            write_heatmap(path, h)  # no metadata and no explicit header values
        write_heatmap(path, h, sigma=1.0, downsample=2.0)
        _, header = read_heatmap(path)
        assert header.sigma == 1.0
