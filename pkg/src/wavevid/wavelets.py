"""Forward/inverse wavelet transforms (CDF 9/7 and Haar) with masked partial synthesis.

All transforms operate on float32/float64 numpy arrays and use the in-place
Mallat subband layout: the approximation band sits in the top-left corner,
detail subbands occupy successively larger quadrants toward the full
resolution.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

# CDF 9/7 lifting constants (JPEG2000 lossy path).
_ALPHA = -1.586134342059924
_BETA = -0.052980118572961
_GAMMA = 0.882911075530934
_DELTA = 0.443506852043971
# Scale chosen so the lifting output matches direct convolution with the
# published 9/7 analysis filters (lowpass DC gain 1).
_K = 1.230174104914001


class WaveletKind(Enum):
    CDF97 = "cdf97"
    HAAR = "haar"

    @property
    def half_width(self) -> int:
        """Synthesis support half-width in coefficient samples."""
        return 4 if self is WaveletKind.CDF97 else 0


class DimensionError(ValueError):
    """Signal or grid dimensions incompatible with the requested transform."""


def _check_even(n: int) -> None:
    if n < 2 or n % 2 != 0:
        raise DimensionError(f"signal length must be even and >= 2, got {n}")


def analyze_1d(signal, wavelet: WaveletKind):
    """One analysis pass; returns (approx, detail), each half the input length.

    Operates along the last axis, so a 2D array transforms all rows at once.
    CDF 9/7 uses whole-sample symmetric boundary extension; Haar pairs
    samples as ((a+b)/2, (a-b)/2).
    """
    x = np.asarray(signal)
    _check_even(x.shape[-1])
    s = x[..., 0::2].astype(x.dtype, copy=True)
    d = x[..., 1::2].astype(x.dtype, copy=True)
    if wavelet is WaveletKind.HAAR:
        return (s + d) * 0.5, (s - d) * 0.5

    # four lifting steps; neighbours extended symmetrically at the borders
    d += _ALPHA * (s + _shift_left(s))
    s += _BETA * (_shift_right(d) + d)
    d += _GAMMA * (s + _shift_left(s))
    s += _DELTA * (_shift_right(d) + d)
    s *= 1.0 / _K
    d *= _K
    return s, d


def synthesize_1d(approx, detail, wavelet: WaveletKind):
    """Exact inverse of :func:`analyze_1d` (perfect reconstruction)."""
    s = np.asarray(approx)
    d = np.asarray(detail)
    if s.shape[-1] != d.shape[-1]:
        raise DimensionError(
            f"approx/detail length mismatch: {s.shape[-1]} vs {d.shape[-1]}"
        )
    if wavelet is WaveletKind.HAAR:
        out = np.empty(s.shape[:-1] + (s.shape[-1] * 2,), dtype=s.dtype)
        out[..., 0::2] = s + d
        out[..., 1::2] = s - d
        return out

    s = s * _K
    d = d * (1.0 / _K)
    s -= _DELTA * (_shift_right(d) + d)
    d -= _GAMMA * (s + _shift_left(s))
    s -= _BETA * (_shift_right(d) + d)
    d -= _ALPHA * (s + _shift_left(s))
    out = np.empty(s.shape[:-1] + (s.shape[-1] * 2,), dtype=s.dtype)
    out[..., 0::2] = s
    out[..., 1::2] = d
    return out


def _shift_left(a):
    # a[i+1] with symmetric extension at the right border
    return np.concatenate([a[..., 1:], a[..., -1:]], axis=-1)


def _shift_right(a):
    # a[i-1] with symmetric extension at the left border
    return np.concatenate([a[..., :1], a[..., :-1]], axis=-1)


@dataclass
class CoefficientPyramid:
    """Multilevel 2D wavelet coefficients of one frame, in-place Mallat layout.

    ``data`` has shape (M, N) or (M, N, channels); ``levels`` is l_max.
    """

    data: np.ndarray
    levels: int

    def __post_init__(self):
        m, n = self.data.shape[:2]
        if self.levels < 1 or (1 << self.levels) > min(m, n):
            raise DimensionError(f"invalid level count {self.levels} for {n}x{m}")
        if m % (1 << self.levels) or n % (1 << self.levels):
            raise DimensionError(
                f"dimensions {n}x{m} not divisible by 2^{self.levels}"
            )

    @property
    def shape(self):
        return self.data.shape


def analyze_2d(frame, levels: int, wavelet: WaveletKind) -> CoefficientPyramid:
    """Recursive separable analysis of ``frame`` into a Mallat pyramid.

    ``frame`` is (M, N) or (M, N, C); channels transform independently.
    """
    data = np.array(frame, dtype=np.float32, copy=True)
    m, n = data.shape[:2]
    pyr = CoefficientPyramid(data, levels)  # validates divisibility
    h, w = m, n
    for _ in range(levels):
        sub = data[:h, :w]
        # rows: transform along x
        a, d = analyze_1d(sub.transpose(_row_axes(sub)), wavelet)
        data[:h, :w] = np.concatenate([a, d], axis=-1).transpose(_row_axes(sub))
        # columns: transform along y
        sub = data[:h, :w]
        colmajor = sub.transpose(_col_axes(sub))
        a, d = analyze_1d(colmajor, wavelet)
        data[:h, :w] = np.concatenate([a, d], axis=-1).transpose(_col_axes_inv(sub))
        h //= 2
        w //= 2
    return pyr


def _row_axes(a):
    # move x (axis 1) last: (M, N[, C]) -> (M[, C], N)
    return (0, 2, 1) if a.ndim == 3 else (0, 1)


def _col_axes(a):
    # move y (axis 0) last: (M, N[, C]) -> (N[, C], M)
    return (1, 2, 0) if a.ndim == 3 else (1, 0)


def _col_axes_inv(a):
    # inverse permutation of _col_axes
    return (2, 0, 1) if a.ndim == 3 else (1, 0)


def synthesize_2d(pyramid: CoefficientPyramid, wavelet: WaveletKind) -> np.ndarray:
    """Full inverse of :func:`analyze_2d`."""
    data = pyramid.data.astype(np.float32, copy=True)
    m, n = data.shape[:2]
    for k in range(pyramid.levels, 0, -1):
        h, w = m >> (k - 1), n >> (k - 1)
        sub = data[:h, :w]
        # columns first (inverse order of analysis)
        colmajor = sub.transpose(_col_axes(sub))
        rec = synthesize_1d(colmajor[..., : h // 2], colmajor[..., h // 2:], wavelet)
        data[:h, :w] = rec.transpose(_col_axes_inv(sub))
        sub = data[:h, :w]
        rowmajor = sub.transpose(_row_axes(sub))
        rec = synthesize_1d(rowmajor[..., : w // 2], rowmajor[..., w // 2:], wavelet)
        data[:h, :w] = rec.transpose(_row_axes(sub))
    return data


def level_of_position(x: int, y: int, l_max: int, dims) -> tuple[int, str]:
    """Map a grid position to its (level, subband) in the Mallat layout."""
    n, m = dims
    if not (0 <= x < n and 0 <= y < m):
        raise IndexError(f"position ({x},{y}) outside {n}x{m} grid")
    for k in range(1, l_max + 1):
        half_w, half_h = n >> k, m >> k
        right, bottom = x >= half_w, y >= half_h
        if right or bottom:
            if x >= half_w * 2 or y >= half_h * 2:
                continue  # belongs to a finer level already ruled out
            if right and bottom:
                return k, "HH"
            return (k, "HL") if right else (k, "LH")
    return l_max, "LL"


def layer_index_grid(n: int, m: int, l_max: int) -> np.ndarray:
    """Per-position storage layer: 0 = approximation (lowest frequency),
    then detail levels coarse to fine. Used to order records inside blocks."""
    grid = np.zeros((m, n), dtype=np.uint8)
    for k in range(1, l_max + 1):
        layer = l_max - k + 1
        hw, hh = n >> k, m >> k
        grid[:hh, hw: 2 * hw] = np.maximum(grid[:hh, hw: 2 * hw], layer)
        grid[hh: 2 * hh, : 2 * hw] = np.maximum(grid[hh: 2 * hh, : 2 * hw], layer)
    return grid


def binary_dilate(mask: np.ndarray, radius: int) -> np.ndarray:
    """Square binary dilation by ``radius`` cells (clamped at borders)."""
    if radius <= 0:
        return mask.astype(bool, copy=True)
    out = mask.astype(bool, copy=True)
    for axis in (0, 1):
        acc = out.copy()
        for r in range(1, radius + 1):
            shifted = np.roll(out, r, axis=axis)
            if axis == 0:
                shifted[:r, :] = False
            else:
                shifted[:, :r] = False
            acc |= shifted
            shifted = np.roll(out, -r, axis=axis)
            if axis == 0:
                shifted[-r:, :] = False
            else:
                shifted[:, -r:] = False
            acc |= shifted
        out = acc
    return out


def dilate_for_synthesis(mask: np.ndarray, wavelet: WaveletKind) -> np.ndarray:
    """Close filter-support dependencies so masked synthesis stays exact."""
    return binary_dilate(np.asarray(mask, dtype=bool), wavelet.half_width)


def downmap2(mask: np.ndarray) -> np.ndarray:
    """Halve a binary grid; a coarse cell is set if any of its 2x2 fine cells is."""
    m, n = mask.shape
    return mask.reshape(m // 2, 2, n // 2, 2).any(axis=(1, 3))


@dataclass
class LevelMaskSet:
    """Per-level coefficient inclusion masks: detail masks for levels
    1 (finest) .. l_max plus the approximation-band mask.

    ``detail[k-1]`` has the resolution of the level-k subbands; ``approx``
    matches the approximation band.
    """

    detail: list
    approx: np.ndarray
    requested: np.ndarray | None = None  # full-res pixel area the caller asked for

    @property
    def levels(self) -> int:
        return len(self.detail)

    @classmethod
    def full(cls, n: int, m: int, levels: int) -> "LevelMaskSet":
        detail = [np.ones((m >> k, n >> k), dtype=bool) for k in range(1, levels + 1)]
        return cls(detail, np.ones((m >> levels, n >> levels), dtype=bool),
                   np.ones((m, n), dtype=bool))

    @classmethod
    def from_pixel_mask(
        cls,
        pixel_mask: np.ndarray,
        levels: int,
        wavelet: WaveletKind,
        windows=None,
    ) -> "LevelMaskSet":
        """Dependency-closed masks for reconstructing ``pixel_mask`` exactly.

        ``windows`` optionally restricts each detail level to a smaller pixel
        region (finest first); the closure cascade of the full mask is still
        maintained so coarser levels cover the whole requested area. The
        approximation band is always loaded in full: it is small and keeps
        the decoded output defined even for an empty viewport.
        """
        pm = np.asarray(pixel_mask, dtype=bool)
        m, n = pm.shape
        cascade = pm
        win_cascade = None if windows is None else [np.asarray(w, bool) for w in windows]
        detail = []
        for k in range(1, levels + 1):
            cascade = dilate_for_synthesis(downmap2(cascade), wavelet)
            if win_cascade is None:
                detail.append(cascade.copy())
            else:
                # cascade the per-level window down to this resolution with
                # the same dilate-per-step closure, so a full-size window
                # reproduces the plain viewport masks exactly
                w = win_cascade[k - 1]
                for _ in range(k):
                    w = dilate_for_synthesis(downmap2(w), wavelet)
                detail.append(cascade & w)
        approx = np.ones((m >> levels, n >> levels), dtype=bool)
        return cls(detail, approx, pm.copy())

    def validate_against(self, pyramid: CoefficientPyramid) -> None:
        m, n = pyramid.data.shape[:2]
        if self.levels != pyramid.levels:
            raise DimensionError(
                f"mask set has {self.levels} levels, pyramid {pyramid.levels}"
            )
        for k, dm in enumerate(self.detail, start=1):
            if dm.shape != (m >> k, n >> k):
                raise DimensionError(
                    f"level-{k} mask shape {dm.shape} != {(m >> k, n >> k)}"
                )
        if self.approx.shape != (m >> self.levels, n >> self.levels):
            raise DimensionError("approximation mask shape mismatch")

    def requested_region(self, n: int, m: int) -> np.ndarray:
        """Pixel-domain area the caller asked to reconstruct.

        For mask sets built from a pixel mask this is that mask itself; the
        dependency-closure halo and the always-loaded approximation band are
        synthesis inputs, not part of the request. Hand-built mask sets fall
        back to the union of the upsampled detail masks."""
        if self.requested is not None:
            return self.requested
        out = np.zeros((m, n), dtype=bool)
        for k, dm in enumerate(self.detail, start=1):
            f = 1 << k
            out |= np.repeat(np.repeat(dm, f, axis=0), f, axis=1)
        return out

    def inclusion_grid(self, n: int, m: int) -> np.ndarray:
        """Full-resolution grid marking every included coefficient position."""
        grid = np.zeros((m, n), dtype=bool)
        l_max = self.levels
        ah, aw = m >> l_max, n >> l_max
        grid[:ah, :aw] = self.approx
        for k, dm in enumerate(self.detail, start=1):
            hh, hw = m >> k, n >> k
            grid[:hh, hw: 2 * hw] |= dm
            grid[hh: 2 * hh, :hw] |= dm
            grid[hh: 2 * hh, hw: 2 * hw] |= dm
        return grid


def _upsample2(mask: np.ndarray) -> np.ndarray:
    return np.repeat(np.repeat(mask, 2, axis=0), 2, axis=1)


def synthesize_2d_region(
    pyramid: CoefficientPyramid,
    region: LevelMaskSet,
    wavelet: WaveletKind,
):
    """Masked inverse transform.

    Coefficients outside the region masks are treated as zero. Returns
    (pixels, footprint): inside the footprint the pixels are bit-identical
    to a full-frame inverse of the same pyramid; elsewhere inside the
    requested region (union of the detail masks) they equal the inverse of
    the masked pyramid; outside the requested region they are zero.

    Synthesis work is confined to the bounding box of the requested region,
    so cost scales with mask area instead of frame area.
    """
    region.validate_against(pyramid)
    m, n = pyramid.data.shape[:2]
    incl = region.inclusion_grid(n, m)
    if pyramid.data.ndim == 3:
        data = pyramid.data * incl[:, :, np.newaxis]
    else:
        data = pyramid.data * incl
    data = data.astype(np.float32, copy=False)

    # footprint: a pixel is exact iff every coefficient that influences it
    # through the synthesis cascade is included
    hw = wavelet.half_width
    valid = region.approx.copy()
    for k in range(pyramid.levels, 0, -1):
        included = valid & region.detail[k - 1]
        invalid_fine = binary_dilate(_upsample2(~included), hw)
        valid = ~invalid_fine

    requested = region.requested_region(n, m)
    # exactness is only promised inside the requested area: outside it the
    # output is zeroed, so the footprint must not extend past it
    valid &= requested
    if not requested.any():
        return np.zeros(data.shape, data.dtype), valid

    # per-level output row/column ranges, finest first: each level must
    # cover the next finer level's input needs plus the trim margin that
    # absorbs wrong boundary extension at interior cuts
    rows = np.nonzero(requested.any(axis=1))[0]
    cols = np.nonzero(requested.any(axis=0))[0]
    e = hw + 1
    need = [((int(rows[0]), int(rows[-1]) + 1),
             (int(cols[0]), int(cols[-1]) + 1))]
    for j in range(1, pyramid.levels):
        (r0, r1), (c0, c1) = need[-1]
        need.append((
            (max(0, r0 // 2 - e), min(m >> j, (r1 + 1) // 2 + e)),
            (max(0, c0 // 2 - e), min(n >> j, (c1 + 1) // 2 + e)),
        ))

    for k in range(pyramid.levels, 0, -1):
        (ro0, ro1), (co0, co1) = need[k - 1]
        bh2, bw2 = m >> k, n >> k  # subband dims at level k
        ri0, ri1 = max(0, ro0 // 2 - e), min(bh2, (ro1 + 1) // 2 + e)
        ci0, ci1 = max(0, co0 // 2 - e), min(bw2, (co1 + 1) // 2 + e)
        # gather the four subband windows into a one-level Mallat block
        top = np.concatenate(
            [data[ri0:ri1, ci0:ci1], data[ri0:ri1, bw2 + ci0: bw2 + ci1]],
            axis=1)
        bot = np.concatenate(
            [data[bh2 + ri0: bh2 + ri1, ci0:ci1],
             data[bh2 + ri0: bh2 + ri1, bw2 + ci0: bw2 + ci1]], axis=1)
        block = np.concatenate([top, bot], axis=0)
        bh, bw = ri1 - ri0, ci1 - ci0
        colmajor = block.transpose(_col_axes(block))
        rec = synthesize_1d(colmajor[..., :bh], colmajor[..., bh:], wavelet)
        block = rec.transpose(_col_axes_inv(block))
        rowmajor = block.transpose(_row_axes(block))
        rec = synthesize_1d(rowmajor[..., :bw], rowmajor[..., bw:], wavelet)
        block = rec.transpose(_row_axes(block))
        # trim the contaminated margin at interior cuts (true borders used
        # the correct symmetric extension and need no trim)
        wr0 = 2 * ri0 + (2 * e if ri0 > 0 else 0)
        wr1 = 2 * ri1 - (2 * e if ri1 < bh2 else 0)
        wc0 = 2 * ci0 + (2 * e if ci0 > 0 else 0)
        wc1 = 2 * ci1 - (2 * e if ci1 < bw2 else 0)
        data[wr0:wr1, wc0:wc1] = block[wr0 - 2 * ri0: wr1 - 2 * ri0,
                                       wc0 - 2 * ci0: wc1 - 2 * ci0]

    if data.ndim == 3:
        pixels = data * requested[:, :, np.newaxis]
    else:
        pixels = data * requested
    return pixels, valid
