"""Encoder: frame analysis, two-stage thresholding, temporal transform, quantization.

Frames enter as uint8 images and are scaled to [0, 1] floats per channel, so
the threshold constants are meaningful regardless of bit depth. Each group of
``inter_size`` frames (an inter-frame set) is transformed jointly along time
with a full Haar transform and stored as sparse quantized records.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .wavelets import (
    CoefficientPyramid,
    DimensionError,
    WaveletKind,
    analyze_2d,
    layer_index_grid,
)


class MappingKind(Enum):
    NONE = "none"
    EQUIRECTANGULAR = "equirectangular"


class EncodeError(ValueError):
    pass


def default_levels(width: int, height: int) -> int:
    """log2(N/32) - 2, clamped to [1, log2(min dims)]."""
    raw = int(math.log2(max(width, 32) / 32)) - 2
    return max(1, min(raw, int(math.log2(min(width, height)))))


def worker_count() -> int:
    """Worker cap from WAVEVID_THREADS (0 or unset = auto)."""
    raw = os.environ.get("WAVEVID_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    return n if n > 0 else (os.cpu_count() or 1)


@dataclass
class EncodeParams:
    alpha: float = 0.1
    inter_threshold: float = 0.005
    levels: int | None = None  # None = default rule from frame width
    inter_size: int = 4
    block_size: int = 32
    mapping: MappingKind = MappingKind.EQUIRECTANGULAR
    quantize: bool = True  # False = float debug mode (lossless round trips)
    stereo: bool = False
    fps: float = 30.0
    mask_w: int = 64
    mask_h: int = 64

    def __post_init__(self):
        if self.alpha < 0 or self.inter_threshold < 0:
            raise EncodeError("thresholds must be >= 0")
        n = self.inter_size
        if n < 1 or n & (n - 1):
            raise EncodeError(f"inter_size must be a power of two >= 1, got {n}")
        if self.block_size < 1 or self.block_size & (self.block_size - 1):
            raise EncodeError("block_size must be a power of two")

    def resolved_levels(self, width: int, height: int) -> int:
        lv = self.levels if self.levels is not None else default_levels(width, height)
        if lv < 1:
            raise EncodeError("levels must be >= 1")
        if width % (1 << lv) or height % (1 << lv):
            raise EncodeError(f"{width}x{height} not divisible by 2^{lv}")
        if width % self.block_size or height % self.block_size:
            raise EncodeError("block_size must divide frame dimensions")
        return lv


def threshold_value(alpha: float, level: int, l_max: int, h: float = 0.0) -> float:
    """Level-weighted threshold: alpha * ((l_max - l) / l_max)^2 + h.

    ``level`` 0 is the finest (highest-frequency) detail level, so high
    frequencies receive the largest threshold.
    """
    if l_max < 1:
        raise EncodeError("l_max must be >= 1")
    if not 0 <= level <= l_max:
        raise EncodeError(f"level {level} outside [0, {l_max}]")
    if h < 0:
        raise EncodeError("mapping factor must be >= 0")
    return alpha * ((l_max - level) / l_max) ** 2 + h


def _threshold_grid(n: int, m: int, l_max: int, alpha: float, mapping_factors) -> np.ndarray:
    """Per-position spatial threshold T; the approximation band gets -inf
    so it is never thresholded. The mapping factor is looked up at the
    frame row each coefficient represents."""
    t = np.empty((m, n), dtype=np.float32)
    hfac = np.asarray(mapping_factors, dtype=np.float32)
    for k in range(1, l_max + 1):
        base = threshold_value(alpha, k - 1, l_max)
        hh, hw = m >> k, n >> k
        rows_top = hfac[(np.arange(hh) << k).clip(0, m - 1)]
        rows_bot = rows_top
        t[:hh, hw: 2 * hw] = base + rows_top[:, None]
        t[hh: 2 * hh, : 2 * hw] = base + rows_bot[:, None]
    t[: m >> l_max, : n >> l_max] = -np.inf  # approximation band always kept
    return t


def sparsify(pyramid: CoefficientPyramid, alpha: float, mapping_factors) -> CoefficientPyramid:
    """First thresholding pass: zero detail coefficients whose per-channel
    max magnitude does not exceed the level- and row-dependent threshold.
    The approximation band is never thresholded. ``mapping_factors`` may be
    None for a flat (H = 0) threshold."""
    m, n = pyramid.data.shape[:2]
    if mapping_factors is None:
        mapping_factors = np.zeros(m, dtype=np.float32)
    if len(mapping_factors) != m:
        raise EncodeError("mapping_factors must have one entry per frame row")
    t = _threshold_grid(n, m, pyramid.levels, alpha, mapping_factors)
    mag = np.abs(pyramid.data)
    if pyramid.data.ndim == 3:
        mag = mag.max(axis=2)
    keep = mag > t
    out = pyramid.data.copy()
    out[~keep] = 0
    return CoefficientPyramid(out, pyramid.levels)


@dataclass
class InterFrameSet:
    """Temporally transformed pyramids of one set, plus per-band extrema.

    ``data`` has shape (n, M, N, C): index 0 is the temporal approximation,
    the rest are Haar details in Mallat order (coarse to fine).
    ``extrema`` has shape (n, C, 4): approx_min/max, detail_min/max per
    temporal frame and channel (spatial bands).
    """

    data: np.ndarray
    levels: int  # spatial levels
    extrema: np.ndarray | None = None


def haar_time_forward(stack: np.ndarray) -> np.ndarray:
    """Full Haar transform along axis 0 into Mallat order."""
    n = stack.shape[0]
    if n & (n - 1):
        raise EncodeError("temporal length must be a power of two")
    out = np.empty_like(stack)
    cur = stack
    end = n
    while cur.shape[0] > 1:
        a = (cur[0::2] + cur[1::2]) * 0.5
        d = (cur[0::2] - cur[1::2]) * 0.5
        half = cur.shape[0] // 2
        out[end - half: end] = d
        end -= half
        cur = a
    out[0] = cur[0]
    return out


def haar_time_inverse(coeffs: np.ndarray) -> np.ndarray:
    """Dense inverse of :func:`haar_time_forward`."""
    n = coeffs.shape[0]
    cur = coeffs[0:1]
    start = 1
    while start < n:
        d = coeffs[start: 2 * start]
        nxt = np.empty((2 * start,) + cur.shape[1:], dtype=cur.dtype)
        nxt[0::2] = cur + d
        nxt[1::2] = cur - d
        cur = nxt
        start *= 2
    return cur


def temporal_level_of(t_idx: int, n: int) -> int:
    """Temporal Haar level (1 = finest) of Mallat index t_idx >= 1."""
    big_l = int(math.log2(n))
    return big_l - int(math.floor(math.log2(t_idx)))


def temporal_sign(t: int, level: int) -> int:
    """High-pass contribution sign of the level's detail at display time t."""
    return 1 if ((t >> (level - 1)) & 1) == 0 else -1


def temporal_forward(pyramids: list[CoefficientPyramid]) -> InterFrameSet:
    """Full Haar transform across the time axis of n same-shape pyramids."""
    if not pyramids:
        raise EncodeError("empty inter-frame set")
    shape = pyramids[0].data.shape
    levels = pyramids[0].levels
    for p in pyramids[1:]:
        if p.data.shape != shape or p.levels != levels:
            raise DimensionError("pyramids in a set must share shape and levels")
    stack = np.stack([p.data for p in pyramids], axis=0)
    return InterFrameSet(haar_time_forward(stack), levels)


def temporal_threshold(s: InterFrameSet, inter_threshold: float) -> InterFrameSet:
    """Second thresholding pass, along the temporal axis.

    Temporal level l = 0 is the finest temporal detail. The temporal
    approximation frame and the spatial approximation band are exempt.
    """
    n = s.data.shape[0]
    if n == 1 or inter_threshold < 0:
        if inter_threshold < 0:
            raise EncodeError("inter_threshold must be >= 0")
        return InterFrameSet(s.data.copy(), s.levels, s.extrema)
    big_l = int(math.log2(n))
    m, w = s.data.shape[1:3]
    ah, aw = m >> s.levels, w >> s.levels
    out = s.data.copy()
    for t_idx in range(1, n):
        lvl = temporal_level_of(t_idx, n)
        t = threshold_value(inter_threshold, lvl - 1, big_l)
        frame = out[t_idx]
        mag = np.abs(frame)
        if frame.ndim == 3:
            mag = mag.max(axis=2)
        kill = mag <= t
        kill[:ah, :aw] = False  # spatial approximation band exempt
        frame[kill] = 0
    return InterFrameSet(out, s.levels, s.extrema)


def compute_extrema(s: InterFrameSet) -> np.ndarray:
    """Per temporal frame and channel: (approx_min, approx_max,
    detail_min, detail_max) over the spatial bands."""
    data = s.data if s.data.ndim == 4 else s.data[..., None]
    n, m, w, c = data.shape
    ah, aw = m >> s.levels, w >> s.levels
    ext = np.zeros((n, c, 4), dtype=np.float32)
    approx = data[:, :ah, :aw, :]
    ext[:, :, 0] = approx.min(axis=(1, 2))
    ext[:, :, 1] = approx.max(axis=(1, 2))
    detail_mask = np.ones((m, w), dtype=bool)
    detail_mask[:ah, :aw] = False
    details = data[:, detail_mask, :]  # (n, P, c)
    ext[:, :, 2] = details.min(axis=1)
    ext[:, :, 3] = details.max(axis=1)
    return ext


def _round_half_away(x: np.ndarray) -> np.ndarray:
    return np.floor(x + 0.5)


def quantize_values(values: np.ndarray, cmin: np.ndarray, cmax: np.ndarray) -> np.ndarray:
    """Map floats to bytes over [cmin, cmax]; constant bands map to 0."""
    span = cmax - cmin
    safe = np.where(span > 0, span, 1.0)
    cd = _round_half_away((values - cmin) / safe * 255.0)
    cd = np.where(span > 0, cd, 0.0)
    return np.clip(cd, 0, 255).astype(np.uint8)


def dequantize_values(cd: np.ndarray, cmin: np.ndarray, cmax: np.ndarray) -> np.ndarray:
    return (cmin + cd.astype(np.float32) / 255.0 * (cmax - cmin)).astype(np.float32)


@dataclass
class SparseCoefficients:
    """Quantized sparse records of one inter-frame set.

    Parallel arrays sorted by (temporal index, block, layer low-frequency
    first, local offset). ``values`` is (R, channels), uint8 when quantized
    or float32 in debug float mode.
    """

    temporal: np.ndarray  # uint8
    block: np.ndarray  # uint32
    offset: np.ndarray  # uint16, row-major within the block
    values: np.ndarray

    def __len__(self) -> int:
        return len(self.offset)

    @property
    def float_mode(self) -> bool:
        return self.values.dtype != np.uint8


def quantize(s: InterFrameSet, block_size: int, float_mode: bool = False) -> SparseCoefficients:
    """Extract nonzero coefficients as (temporal, block, offset, values)
    records, quantized to one byte per channel unless ``float_mode``."""
    if s.extrema is None:
        s.extrema = compute_extrema(s)
    data = s.data if s.data.ndim == 4 else s.data[..., None]
    n, m, w, c = data.shape
    nbx = w // block_size
    ah, aw = m >> s.levels, w >> s.levels

    nz = np.any(data != 0, axis=3)  # (n, m, w)
    t_idx, ys, xs = np.nonzero(nz)
    vals = data[t_idx, ys, xs]  # (R, c) float32

    block = (ys // block_size) * nbx + (xs // block_size)
    offset = (ys % block_size) * block_size + (xs % block_size)
    layer = layer_index_grid(w, m, s.levels)[ys, xs]

    order = np.lexsort((offset, layer, block, t_idx))
    t_idx, block, offset, vals = t_idx[order], block[order], offset[order], vals[order]
    ys, xs = ys[order], xs[order]

    if float_mode:
        values = vals.astype(np.float32)
    else:
        in_approx = (ys < ah) & (xs < aw)
        ext = s.extrema  # (n, c, 4)
        cmin = np.where(in_approx[:, None], ext[t_idx, :, 0], ext[t_idx, :, 2])
        cmax = np.where(in_approx[:, None], ext[t_idx, :, 1], ext[t_idx, :, 3])
        values = quantize_values(vals, cmin, cmax)

    return SparseCoefficients(
        temporal=t_idx.astype(np.uint8),
        block=block.astype(np.uint32),
        offset=offset.astype(np.uint16),
        values=values,
    )


@dataclass
class EncodedSet:
    records: SparseCoefficients
    extrema: np.ndarray  # (n, channels, 4) float32


@dataclass
class EncodedVideo:
    width: int
    height: int
    frame_count: int  # real frames, excluding padding
    fps: float
    channels: int
    levels: int
    inter_size: int
    block_size: int
    mask_w: int
    mask_h: int
    pad_frames: int
    float_mode: bool
    stereo: bool
    sets: list[EncodedSet] = field(default_factory=list)


def equirect_mapping_factors(height: int) -> np.ndarray:
    """H(y) = 1 - sin(y * pi / S_y): zero at the equator, one at the poles."""
    y = np.arange(height, dtype=np.float32)
    return 1.0 - np.sin(y * np.pi / height).astype(np.float32)


def _encode_set(frames_f32, params: EncodeParams, levels: int, hfac) -> EncodedSet:
    pyramids = [
        sparsify(analyze_2d(f, levels, WaveletKind.CDF97), params.alpha, hfac)
        for f in frames_f32
    ]
    s = temporal_forward(pyramids)
    s = temporal_threshold(s, params.inter_threshold)
    s.extrema = compute_extrema(s)
    records = quantize(s, params.block_size, float_mode=not params.quantize)
    return EncodedSet(records=records, extrema=s.extrema)


def encode_video(frames: np.ndarray, params: EncodeParams) -> EncodedVideo:
    """Encode a (F, M, N[, C]) uint8 frame stack into sparse sets.

    The last partial inter-frame set is padded by repeating the final frame;
    padding frames are flagged in the header and dropped on decode.
    """
    frames = np.asarray(frames)
    if frames.ndim == 3:
        frames = frames[..., None]
    if frames.size == 0 or frames.shape[0] == 0:
        raise EncodeError("empty input")
    count, m, w, c = frames.shape
    levels = params.resolved_levels(w, m)
    n = params.inter_size
    pad = (-count) % n
    if pad:
        frames = np.concatenate([frames, np.repeat(frames[-1:], pad, axis=0)])

    hfac = (
        equirect_mapping_factors(m)
        if params.mapping is MappingKind.EQUIRECTANGULAR
        else np.zeros(m, dtype=np.float32)
    )
    scaled = frames.astype(np.float32) / 255.0
    chunks = [scaled[i: i + n] for i in range(0, len(scaled), n)]

    workers = min(worker_count(), len(chunks))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            sets = list(pool.map(lambda ch: _encode_set(ch, params, levels, hfac), chunks))
    else:
        sets = [_encode_set(ch, params, levels, hfac) for ch in chunks]

    return EncodedVideo(
        width=w,
        height=m,
        frame_count=count,
        fps=params.fps,
        channels=c,
        levels=levels,
        inter_size=n,
        block_size=params.block_size,
        mask_w=params.mask_w,
        mask_h=params.mask_h,
        pad_frames=pad,
        float_mode=not params.quantize,
        stereo=params.stereo,
        sets=sets,
    )
