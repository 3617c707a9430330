"""Thresholding, temporal transform, quantization, and whole-clip encoding."""
import os

import numpy as np
import pytest

from wavevid.encoding import (
    EncodeError,
    EncodeParams,
    InterFrameSet,
    MappingKind,
    SparseCoefficients,
    compute_extrema,
    default_levels,
    dequantize_values,
    encode_video,
    equirect_mapping_factors,
    haar_time_forward,
    haar_time_inverse,
    quantize,
    quantize_values,
    sparsify,
    temporal_forward,
    temporal_threshold,
    threshold_value,
    worker_count,
)
from wavevid.fileio import VideoReader, write_video
from wavevid.wavelets import CoefficientPyramid, WaveletKind, analyze_2d, layer_index_grid


class TestThresholdValue:
    def test_finest_level(self):
        assert threshold_value(0.1, 0, 6) == pytest.approx(0.1)

    def test_coarsest_level_vanishes(self):
        assert threshold_value(0.1, 6, 6) == pytest.approx(0.0)

    def test_with_mapping_term(self):
        assert threshold_value(0.1, 3, 6, h=0.5) == pytest.approx(0.525)

    def test_monotone_in_level(self):
        values = [threshold_value(0.25, l, 6) for l in range(7)]
        assert values == sorted(values, reverse=True)


class TestSparsify:
    def _pyramid(self, data, levels=2):
        return CoefficientPyramid(np.asarray(data, dtype=np.float32), levels)

    def test_zero_alpha_identity(self, rng):
        data = rng.normal(size=(16, 16)).astype(np.float32)
        pyr = self._pyramid(data)
        out = sparsify(pyr, 0.0, None)
        np.testing.assert_array_equal(out.data, data)

    def test_alpha_one_kills_small_finest(self, rng):
        data = rng.uniform(-1, 1, size=(16, 16)).astype(np.float32)
        out = sparsify(self._pyramid(data), 1.0, None)
        # finest level = everything outside the 8x8 coarser quadrant
        fine = out.data.copy()
        fine[:8, :8] = 0
        assert np.abs(fine).max() == 0

    def test_direct_comparison_at_finest(self):
        data = np.zeros((16, 16), dtype=np.float32)
        data[0, 0] = 0.9  # approximation, exempt
        data[15, 15] = 0.2  # finest detail above T=0.1
        data[15, 14] = 0.05  # finest detail below T=0.1
        out = sparsify(self._pyramid(data), 0.1, None)
        assert out.data[15, 15] == pytest.approx(0.2)
        assert out.data[15, 14] == 0
        assert out.data[0, 0] == pytest.approx(0.9)

    def test_approximation_band_always_kept(self, rng):
        data = rng.uniform(-0.01, 0.01, size=(16, 16)).astype(np.float32)
        out = sparsify(self._pyramid(data), 1.0, None)
        np.testing.assert_array_equal(out.data[:4, :4], data[:4, :4])

    def test_mapping_factor_raises_threshold(self):
        m = 16
        data = np.zeros((m, m), dtype=np.float32)
        data[15, 15] = 0.15  # survives H=0 at alpha=0.1, dies near the pole row
        hfac = equirect_mapping_factors(m)
        kept = sparsify(self._pyramid(data), 0.1, None)
        killed = sparsify(self._pyramid(data), 0.1, hfac)
        assert kept.data[15, 15] != 0
        assert killed.data[15, 15] == 0


class TestTemporalTransform:
    def test_series_4268(self):
        out = haar_time_forward(np.array([4.0, 2.0, 6.0, 8.0]))
        np.testing.assert_allclose(out, [5.0, -2.0, 1.0, -1.0])

    def test_forward_inverse_roundtrip(self, rng):
        stack = rng.normal(size=(8, 4, 4))
        np.testing.assert_allclose(haar_time_inverse(haar_time_forward(stack)),
                                   stack, atol=1e-6)

    def test_static_content_zero_details(self, rng):
        frame = rng.normal(size=(16, 16)).astype(np.float32)
        pyramids = [CoefficientPyramid(frame.copy(), 2) for _ in range(4)]
        s = temporal_forward(pyramids)
        np.testing.assert_allclose(s.data[0], frame, atol=1e-6)
        assert np.abs(s.data[1:]).max() < 1e-6

    def test_n_equal_one_identity(self, rng):
        frame = rng.normal(size=(16, 16)).astype(np.float32)
        s = temporal_forward([CoefficientPyramid(frame.copy(), 2)])
        np.testing.assert_array_equal(s.data[0], frame)

    def test_non_power_of_two_rejected(self):
        with pytest.raises(EncodeError):
            haar_time_forward(np.zeros((3, 4, 4)))


class TestTemporalThreshold:
    def _set(self, data):
        return InterFrameSet(np.asarray(data, dtype=np.float32), 2)

    def test_zero_threshold_identity(self, rng):
        data = rng.normal(size=(4, 16, 16)).astype(np.float32)
        out = temporal_threshold(self._set(data), 0.0)
        np.testing.assert_array_equal(out.data, data)

    def test_static_content_unchanged(self, rng):
        data = np.zeros((4, 16, 16), dtype=np.float32)
        data[0] = rng.normal(size=(16, 16))
        out = temporal_threshold(self._set(data), 0.005)
        np.testing.assert_array_equal(out.data, data)

    def test_finest_level_boundary(self):
        data = np.zeros((4, 16, 16), dtype=np.float32)
        data[2, 15, 15] = 0.004  # level-1 detail below T=0.005
        data[3, 15, 14] = 0.006  # level-1 detail above
        out = temporal_threshold(self._set(data), 0.005)
        assert out.data[2, 15, 15] == 0
        assert out.data[3, 15, 14] == pytest.approx(0.006)

    def test_spatial_approx_exempt_in_detail_frames(self):
        data = np.zeros((4, 16, 16), dtype=np.float32)
        data[1, 0, 0] = 1e-6  # spatial approximation band of a detail frame
        out = temporal_threshold(self._set(data), 0.005)
        assert out.data[1, 0, 0] == pytest.approx(1e-6)

    def test_negative_threshold_rejected(self):
        with pytest.raises(EncodeError):
            temporal_threshold(self._set(np.zeros((4, 16, 16))), -0.1)


class TestQuantization:
    def test_midpoint(self):
        out = quantize_values(np.array([0.0]), np.array([-1.0]), np.array([1.0]))
        assert out[0] == 128

    def test_endpoints(self):
        lo = quantize_values(np.array([-1.0]), np.array([-1.0]), np.array([1.0]))
        hi = quantize_values(np.array([1.0]), np.array([-1.0]), np.array([1.0]))
        assert lo[0] == 0 and hi[0] == 255

    def test_roundtrip_error_bound(self, rng):
        cmin, cmax = np.array([-2.5]), np.array([1.5])
        c = rng.uniform(cmin[0], cmax[0], size=10_000)
        cd = quantize_values(c, cmin, cmax)
        back = dequantize_values(cd, cmin, cmax)
        assert np.abs(back - c).max() <= (cmax[0] - cmin[0]) / 510 + 1e-6

    def test_constant_band_stores_zero(self):
        out = quantize_values(np.array([0.7, 0.7]), np.array([0.7]), np.array([0.7]))
        assert out.tolist() == [0, 0]

    def test_extrema_attained_and_respected(self, rng):
        data = rng.normal(size=(4, 32, 32, 3)).astype(np.float32)
        s = InterFrameSet(data, 2)
        ext = compute_extrema(s)
        for t in range(4):
            for c in range(3):
                approx = data[t, :8, :8, c]
                assert ext[t, c, 0] == approx.min() and ext[t, c, 1] == approx.max()
                detail = data[t].copy()[..., c]
                detail[:8, :8] = np.nan
                flat = detail[~np.isnan(detail)]
                assert ext[t, c, 2] == flat.min() and ext[t, c, 3] == flat.max()


class TestRecordOrdering:
    def test_sorted_by_temporal_block_layer_offset(self, rng):
        data = rng.normal(size=(4, 64, 64, 3)).astype(np.float32)
        s = InterFrameSet(data, 3)
        recs = quantize(s, block_size=32)
        layers = layer_index_grid(64, 64, 3)
        by = (recs.block // 2) * 32 + recs.offset // 32
        bx = (recs.block % 2) * 32 + recs.offset % 32
        layer = layers[by, bx]
        key = np.stack([recs.temporal, recs.block, layer, recs.offset])
        assert (np.lexsort(key[::-1]) == np.arange(len(recs))).all()
        assert recs.offset.max() < 32 * 32


class TestEncodeVideo:
    def test_all_black_clip_metadata_dominated(self, tmp_path):
        clip = np.zeros((4, 64, 64, 3), dtype=np.uint8)
        video = encode_video(clip, EncodeParams())
        path = tmp_path / "black.wvv"
        size = write_video(video, path)
        assert all(len(s.records) == 0 for s in video.sets)
        assert clip.nbytes / size > 100

    def test_lossless_float_mode(self, rng, tmp_path):
        clip = rng.integers(0, 256, (4, 64, 64, 3), dtype=np.uint8)
        video = encode_video(clip, EncodeParams(
            alpha=0.0, inter_threshold=0.0, quantize=False, levels=2,
            mapping=MappingKind.NONE))
        path = tmp_path / "lossless.wvv"
        write_video(video, path)
        from wavevid.decoding import DecodeSession
        with DecodeSession(path) as session:
            for frame in range(4):
                pixels, _, _ = session.decode_full(frame)
                err = np.abs(pixels.astype(np.float64) - clip[frame]) / 255.0
                assert err.max() <= 1e-3

    def test_lq_file_smaller_than_hq(self, smooth_clip, tmp_path):
        sizes = {}
        for name, alpha in (("hq", 0.1), ("lq", 0.25)):
            video = encode_video(smooth_clip, EncodeParams(
                alpha=alpha, inter_threshold=0.005, levels=3,
                mapping=MappingKind.NONE))
            sizes[name] = write_video(video, tmp_path / f"{name}.wvv")
        assert sizes["lq"] < sizes["hq"]

    def test_encode_idempotent(self, smooth_clip, tmp_path):
        params = EncodeParams(levels=3)
        a = (tmp_path / "a.wvv")
        b = (tmp_path / "b.wvv")
        write_video(encode_video(smooth_clip, params), a)
        write_video(encode_video(smooth_clip, params), b)
        assert a.read_bytes() == b.read_bytes()

    def test_last_set_padded_by_repetition(self, rng, tmp_path):
        clip = rng.integers(0, 256, (6, 64, 64, 3), dtype=np.uint8)
        video = encode_video(clip, EncodeParams(levels=2, mapping=MappingKind.NONE))
        assert video.pad_frames == 2
        path = tmp_path / "padded.wvv"
        write_video(video, path)
        with VideoReader(path) as reader:
            assert reader.header.frame_count == 6
            assert reader.header.num_sets == 2

    def test_invalid_params_rejected(self):
        with pytest.raises(EncodeError):
            EncodeParams(inter_size=3)
        with pytest.raises(EncodeError):
            EncodeParams(block_size=20)
        with pytest.raises(EncodeError):
            EncodeParams(alpha=-0.5)


class TestDefaults:
    def test_default_levels_rule(self):
        assert default_levels(8192, 4096) == 6  # log2(8192/32) - 2
        assert default_levels(512, 512) == 2
        assert default_levels(64, 64) == 1  # clamped from below

    def test_worker_count_env(self, monkeypatch):
        monkeypatch.setenv("WAVEVID_THREADS", "3")
        assert worker_count() == 3
        monkeypatch.setenv("WAVEVID_THREADS", "0")
        assert worker_count() >= 1
        monkeypatch.delenv("WAVEVID_THREADS")
        assert worker_count() >= 1
