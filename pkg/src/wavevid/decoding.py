"""Viewport-dependent and foveated reconstruction.

A :class:`DecodeSession` owns an open reader, caches the dequantized record
set it is currently playing plus at most one prefetched set, and exposes the
two decode paths: full-quality viewport decode and foveated decode.
"""
from __future__ import annotations

import math
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from .encoding import SparseCoefficients, temporal_level_of, temporal_sign
from .fileio import VideoReader, upscale_mask
from .wavelets import CoefficientPyramid, LevelMaskSet, WaveletKind, synthesize_2d_region


class DecodeError(ValueError):
    pass


class CorruptStreamError(DecodeError):
    pass


def record_positions(records: SparseCoefficients, width: int, block_size: int):
    """Grid coordinates (ys, xs) of each record."""
    nbx = width // block_size
    by, bx = records.block // nbx, records.block % nbx
    oy, ox = records.offset // block_size, records.offset % block_size
    return by * block_size + oy, bx * block_size + ox


def dequantize_records(records: SparseCoefficients, extrema: np.ndarray,
                       width: int, height: int, levels: int,
                       block_size: int) -> np.ndarray:
    """Per-record float values, mapped back to band range unless the
    stream is already in float debug mode. Returns (R, C) float32."""
    if records.float_mode:
        return records.values.astype(np.float32)
    ys, xs = record_positions(records, width, block_size)
    ah, aw = height >> levels, width >> levels
    in_approx = (ys < ah) & (xs < aw)
    t = records.temporal.astype(np.int64)
    cmin = np.where(in_approx[:, None], extrema[t, :, 0], extrema[t, :, 2])
    cmax = np.where(in_approx[:, None], extrema[t, :, 1], extrema[t, :, 3])
    return (cmin + records.values.astype(np.float32) / 255.0 * (cmax - cmin)).astype(np.float32)


def temporal_inverse_sparse(records: SparseCoefficients, extrema: np.ndarray,
                            t: int, width: int, height: int, levels: int,
                            inter_size: int, block_size: int,
                            channels: int) -> CoefficientPyramid:
    """Reconstruct the spatial pyramid of frame ``t`` within its set.

    Each display frame is the temporal approximation plus log2(n) signed
    detail additions; the iteration runs over the loaded records, and
    positions without records decode to zero.
    """
    if not 0 <= t < inter_size:
        raise DecodeError(f"frame index {t} outside set of {inter_size}")
    if len(records) and int(records.offset.max(initial=0)) >= block_size * block_size:
        raise CorruptStreamError("record offset outside block")
    ys, xs = record_positions(records, width, block_size)
    if len(records) and (int(ys.max(initial=0)) >= height or int(xs.max(initial=0)) >= width):
        raise CorruptStreamError("record position outside frame")
    vals = dequantize_records(records, extrema, width, height, levels, block_size)

    # signed weight of each temporal frame's records at display time t
    weights = np.zeros(inter_size, dtype=np.float32)
    weights[0] = 1.0
    for t_idx in range(1, inter_size):
        lvl = temporal_level_of(t_idx, inter_size)
        big_l = int(math.log2(inter_size))
        idx = t_idx - (1 << (big_l - lvl))
        if (t >> lvl) == idx:
            weights[t_idx] = temporal_sign(t, lvl)

    w = weights[records.temporal.astype(np.int64)]
    live = w != 0
    flat_idx = (ys[live].astype(np.int64) * width + xs[live])
    contrib = vals[live] * w[live, None]

    plane = np.zeros((height * width, channels), dtype=np.float32)
    np.add.at(plane, flat_idx, contrib)
    data = plane.reshape(height, width, channels)
    return CoefficientPyramid(data, levels)


@dataclass
class FoveationSchedule:
    """Per-level retained fraction of the viewport, coarsest first
    (entry 0 is the approximation level, always 1.0), plus the gaze point
    in viewport coordinates."""

    fractions: tuple
    gaze_u: float = 0.5
    gaze_v: float = 0.5

    def __post_init__(self):
        f = tuple(float(x) for x in self.fractions)
        if not f or f[0] != 1.0:
            raise DecodeError("coarsest fraction must be 1.0")
        if any(b > a for a, b in zip(f, f[1:])):
            raise DecodeError("fractions must be non-increasing toward finer levels")
        if not (0.0 <= self.gaze_u <= 1.0 and 0.0 <= self.gaze_v <= 1.0):
            raise DecodeError("gaze must lie inside the viewport")
        self.fractions = f

    @classmethod
    def default(cls, levels: int, gaze_u: float = 0.5, gaze_v: float = 0.5) -> "FoveationSchedule":
        if levels == 6:
            fr = (1.0, 0.65, 0.40, 0.22, 0.10, 0.04, 0.02)
        elif levels == 1:
            fr = (1.0, 0.02)
        else:
            fr = (1.0,) + tuple(np.geomspace(0.65, 0.02, levels))
        return cls(fr, gaze_u, gaze_v)


def foveation_masks(viewport_pixel_mask: np.ndarray, schedule: FoveationSchedule,
                    levels: int, wavelet: WaveletKind = WaveletKind.CDF97) -> LevelMaskSet:
    """Level masks that keep the full viewport at the coarsest level and a
    shrinking gaze-centred rectilinear window toward finer levels."""
    pm = np.asarray(viewport_pixel_mask, dtype=bool)
    m, n = pm.shape
    ys, xs = np.nonzero(pm)
    if ys.size == 0:
        return LevelMaskSet.from_pixel_mask(pm, levels, wavelet)
    y0, y1, x0, x1 = ys.min(), ys.max() + 1, xs.min(), xs.max() + 1
    gw, gh = x1 - x0, y1 - y0
    cx = x0 + schedule.gaze_u * gw
    cy = y0 + schedule.gaze_v * gh

    windows = []
    # schedule.fractions[0] is the approximation level; detail levels run
    # coarse (index 1) to fine (last). Masks are built finest-first.
    detail_fracs = list(schedule.fractions[1:])
    while len(detail_fracs) < levels:
        detail_fracs.append(detail_fracs[-1] if detail_fracs else 1.0)
    for k in range(1, levels + 1):
        f = detail_fracs[levels - k] if levels - k < len(detail_fracs) else 1.0
        win = np.zeros_like(pm)
        half_w, half_h = f * gw / 2.0, f * gh / 2.0
        ra = slice(max(0, int(cy - half_h)), min(m, int(math.ceil(cy + half_h))))
        ca = slice(max(0, int(cx - half_w)), min(n, int(math.ceil(cx + half_w))))
        win[ra, ca] = True
        windows.append(win & pm)
    return LevelMaskSet.from_pixel_mask(pm, levels, wavelet, windows=windows)


@dataclass
class DecodeStats:
    bytes_loaded: int = 0
    records_processed: int = 0
    load_ms: float = 0.0
    temporal_ms: float = 0.0
    synthesis_ms: float = 0.0

    @property
    def decode_ms(self) -> float:
        return self.load_ms + self.temporal_ms + self.synthesis_ms


@dataclass
class _CachedSet:
    set_index: int
    block_ids: np.ndarray
    records: SparseCoefficients
    bytes_loaded: int


@dataclass
class SessionStats:
    bytes_loaded: int = 0
    records_processed: int = 0
    frames_decoded: int = 0
    total_ms: float = 0.0


class DecodeSession:
    """Single-owner decode session with a one-slot prefetch worker.

    The cache holds at most the current set and the prefetched next set.
    Loading is monotone: if a later mask needs more blocks than a cached
    load, only the missing blocks are fetched and merged.
    """

    def __init__(self, path):
        self.reader = VideoReader(path)
        self.header = self.reader.header
        self._cache: dict[int, _CachedSet] = {}
        self._prefetch_thread: threading.Thread | None = None
        self._lock = threading.Lock()
        self.stats = SessionStats()

    def close(self):
        self.join_prefetch()
        self.reader.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # -- loading ----------------------------------------------------------

    def _ensure_blocks(self, set_index: int, block_ids: np.ndarray) -> tuple[_CachedSet, int]:
        """Make sure the cached set covers ``block_ids``; returns the cache
        entry and the bytes read by this call."""
        with self._lock:
            cached = self._cache.get(set_index)
            if cached is None:
                records, nbytes = self.reader.load_blocks(set_index, block_ids)
                entry = _CachedSet(set_index, np.unique(block_ids), records, nbytes)
                self._store(entry)
                return entry, nbytes
            missing = np.setdiff1d(block_ids, cached.block_ids)
            if missing.size == 0:
                return cached, 0
            extra, nbytes = self.reader.load_blocks(set_index, missing)
            merged = _merge_records(cached.records, extra)
            entry = _CachedSet(
                set_index,
                np.union1d(cached.block_ids, missing),
                merged,
                cached.bytes_loaded + nbytes,
            )
            self._store(entry)
            return entry, nbytes

    def _store(self, entry: _CachedSet):
        self._cache[entry.set_index] = entry
        if len(self._cache) > 2:  # keep current + prefetch only
            oldest = min(self._cache)
            if oldest != entry.set_index:
                del self._cache[oldest]

    # -- decoding ---------------------------------------------------------

    def _frame_set(self, frame: int) -> tuple[int, int]:
        if not (0 <= frame < self.header.frame_count):
            raise DecodeError(
                f"frame {frame} out of range [0, {self.header.frame_count})"
            )
        return frame // self.header.inter_size, frame % self.header.inter_size

    def _pixel_mask(self, mask: np.ndarray) -> np.ndarray:
        h = self.header
        if mask.shape != (h.mask_h, h.mask_w):
            raise DecodeError(
                f"mask dims {mask.shape} != header ({h.mask_h}, {h.mask_w})"
            )
        return upscale_mask(mask, h.width, h.height)

    def _decode(self, frame: int, level_masks: LevelMaskSet):
        h = self.header
        set_index, t = self._frame_set(frame)
        stats = DecodeStats()

        incl = level_masks.inclusion_grid(h.width, h.height)
        bs = h.block_size
        per_block = incl.reshape(h.blocks_y, bs, h.blocks_x, bs).any(axis=(1, 3))
        block_ids = np.nonzero(per_block.reshape(-1))[0]

        t0 = time.perf_counter()
        entry, nbytes = self._ensure_blocks(set_index, block_ids)
        stats.bytes_loaded = nbytes if nbytes else entry.bytes_loaded
        stats.load_ms = (time.perf_counter() - t0) * 1000

        # restrict to the blocks this decode asked for, keeping determinism
        # independent of what else the cache happens to hold
        sel = np.isin(entry.records.block, block_ids)
        records = SparseCoefficients(
            temporal=entry.records.temporal[sel],
            block=entry.records.block[sel],
            offset=entry.records.offset[sel],
            values=entry.records.values[sel],
        )
        stats.records_processed = len(records)

        t0 = time.perf_counter()
        pyramid = temporal_inverse_sparse(
            records, self.reader.set_meta[set_index].extrema, t,
            h.width, h.height, h.levels, h.inter_size, bs, h.channels,
        )
        stats.temporal_ms = (time.perf_counter() - t0) * 1000

        t0 = time.perf_counter()
        pixels_f, footprint = synthesize_2d_region(pyramid, level_masks, WaveletKind.CDF97)
        stats.synthesis_ms = (time.perf_counter() - t0) * 1000

        # inside the requested region but outside the footprint the pixels
        # carry the coarse reconstruction (the approximation band is always
        # loaded); pixels outside the requested region are zero; the
        # footprint marks where the result equals a full-frame decode exactly
        pixels = np.clip(np.rint(pixels_f * 255.0), 0, 255).astype(np.uint8)

        self.stats.bytes_loaded += stats.bytes_loaded
        self.stats.records_processed += stats.records_processed
        self.stats.frames_decoded += 1
        self.stats.total_ms += stats.decode_ms
        return pixels, footprint, stats

    def decode_viewport(self, frame: int, mask: np.ndarray):
        """Full-quality decode of the masked region.

        Returns (pixels, footprint, stats); footprint pixels equal a
        full-frame decode exactly.
        """
        pm = self._pixel_mask(mask)
        masks = LevelMaskSet.from_pixel_mask(pm, self.header.levels, WaveletKind.CDF97)
        return self._decode(frame, masks)

    def decode_foveated(self, frame: int, mask: np.ndarray,
                        schedule: FoveationSchedule | None = None):
        """Gaze-contingent decode: full viewport at the coarsest level,
        shrinking windows toward finer levels."""
        pm = self._pixel_mask(mask)
        schedule = schedule or FoveationSchedule.default(self.header.levels)
        masks = foveation_masks(pm, schedule, self.header.levels)
        return self._decode(frame, masks)

    def decode_full(self, frame: int):
        """Whole-frame decode (all-ones mask)."""
        h = self.header
        return self._decode(frame, LevelMaskSet.full(h.width, h.height, h.levels))

    # -- prefetch ---------------------------------------------------------

    def advance(self, current_frame: int, next_mask: np.ndarray) -> None:
        """Start loading the next inter-frame set for ``next_mask`` in the
        background while the current set stays decodable."""
        set_index = current_frame // self.header.inter_size + 1
        if set_index >= self.header.num_sets:
            return
        pm = self._pixel_mask(next_mask)
        block_ids = self.reader.blocks_for_mask(pm)
        self.join_prefetch()

        def work():
            self._ensure_blocks(set_index, block_ids)

        self._prefetch_thread = threading.Thread(target=work, daemon=True)
        self._prefetch_thread.start()

    def join_prefetch(self):
        if self._prefetch_thread is not None:
            self._prefetch_thread.join()
            self._prefetch_thread = None


def _merge_records(a: SparseCoefficients, b: SparseCoefficients) -> SparseCoefficients:
    """Merge two disjoint record sets, restoring storage order."""
    temporal = np.concatenate([a.temporal, b.temporal])
    block = np.concatenate([a.block, b.block])
    offset = np.concatenate([a.offset, b.offset])
    values = np.concatenate([a.values, b.values])
    order = np.lexsort((offset, block, temporal))
    return SparseCoefficients(temporal[order], block[order], offset[order], values[order])
