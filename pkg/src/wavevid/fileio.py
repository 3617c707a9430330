"""Bit-exact .wvv reader/writer: header, per-set metadata, alternating
BlockEnd tables and coefficient records, selective block-range loading.

All integers are little-endian. Layout:

    64-byte header
    SetMeta table (one entry per inter-frame set)
    per set: BlockEnd table, then records

A record is a uint16 row-major offset inside its block followed by one byte
per channel (or one float32 per channel in debug float mode). The block id
is implicit from the BlockEnd position, the temporal frame from the table
section; the coefficient's level is recoverable from its grid position.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .encoding import EncodedSet, EncodedVideo, SparseCoefficients
from .wavelets import LevelMaskSet, WaveletKind

MAGIC = b"WVVC"
VERSION = 1
HEADER_SIZE = 64
_HEADER_FMT = "<4sHHIIIfBBBBHHB31x"
FLAG_STEREO = 1
FLAG_FLOAT = 2
COALESCE_GAP = 4096  # read through gaps up to this many bytes


class FormatError(ValueError):
    """Malformed or unsupported .wvv data."""


@dataclass
class VideoHeader:
    width: int
    height: int
    frame_count: int
    fps: float
    channels: int
    levels: int
    inter_size: int
    block_size: int
    mask_w: int
    mask_h: int
    pad_frames: int
    stereo: bool = False
    float_mode: bool = False
    version: int = VERSION

    def __post_init__(self):
        if self.width % (1 << self.levels) or self.height % (1 << self.levels):
            raise FormatError("dimensions not divisible by 2^levels")
        if self.width % self.block_size or self.height % self.block_size:
            raise FormatError("block_size must divide dimensions")
        if (self.frame_count + self.pad_frames) % self.inter_size:
            raise FormatError("frame_count + pad_frames must fill whole sets")

    @property
    def num_sets(self) -> int:
        return (self.frame_count + self.pad_frames) // self.inter_size

    @property
    def blocks_x(self) -> int:
        return self.width // self.block_size

    @property
    def blocks_y(self) -> int:
        return self.height // self.block_size

    @property
    def num_blocks(self) -> int:
        return self.blocks_x * self.blocks_y

    @property
    def record_size(self) -> int:
        return 2 + self.channels * (4 if self.float_mode else 1)

    @property
    def value_dtype(self):
        return np.float32 if self.float_mode else np.uint8

    def pack(self) -> bytes:
        flags = (FLAG_STEREO if self.stereo else 0) | (FLAG_FLOAT if self.float_mode else 0)
        n_log2 = self.inter_size.bit_length() - 1
        bs_log2 = self.block_size.bit_length() - 1
        return struct.pack(
            _HEADER_FMT, MAGIC, self.version, flags,
            self.width, self.height, self.frame_count, self.fps,
            self.channels, self.levels, n_log2, bs_log2,
            self.mask_w, self.mask_h, self.pad_frames,
        )

    @classmethod
    def unpack(cls, raw: bytes) -> "VideoHeader":
        if len(raw) < HEADER_SIZE:
            raise FormatError(f"truncated header: {len(raw)} bytes")
        (magic, version, flags, width, height, frame_count, fps,
         channels, levels, n_log2, bs_log2, mask_w, mask_h, pad) = struct.unpack(
            _HEADER_FMT, raw[:HEADER_SIZE])
        if magic != MAGIC:
            raise FormatError(f"unsupported format: bad magic {magic!r}")
        if version != VERSION:
            raise FormatError(f"unsupported version {version}")
        return cls(
            width=width, height=height, frame_count=frame_count, fps=fps,
            channels=channels, levels=levels, inter_size=1 << n_log2,
            block_size=1 << bs_log2, mask_w=mask_w, mask_h=mask_h,
            pad_frames=pad, stereo=bool(flags & FLAG_STEREO),
            float_mode=bool(flags & FLAG_FLOAT), version=version,
        )


@dataclass
class SetMeta:
    payload_offset: int  # absolute offset of the set's BlockEnd table
    payload_length: int  # BlockEnd table + records
    record_count: int
    extrema: np.ndarray  # (n, channels, 4) float32

    def pack(self) -> bytes:
        head = struct.pack("<QQQ", self.payload_offset, self.payload_length,
                           self.record_count)
        return head + self.extrema.astype("<f4").tobytes()

    @staticmethod
    def size(inter_size: int, channels: int) -> int:
        return 24 + inter_size * channels * 16

    @classmethod
    def unpack(cls, raw: bytes, inter_size: int, channels: int) -> "SetMeta":
        off, length, count = struct.unpack("<QQQ", raw[:24])
        ext = np.frombuffer(raw[24:], dtype="<f4").reshape(inter_size, channels, 4)
        return cls(off, length, count, ext.copy())


@dataclass
class BlockEndTable:
    """Cumulative record-region end offsets, (n, num_blocks) uint64,
    relative to the set's coefficient-data start."""

    ends: np.ndarray

    def pack(self) -> bytes:
        return self.ends.astype("<u8").tobytes()

    @classmethod
    def unpack(cls, raw: bytes, n: int, num_blocks: int) -> "BlockEndTable":
        ends = np.frombuffer(raw, dtype="<u8").reshape(n, num_blocks)
        return cls(ends.copy())

    @classmethod
    def from_records(cls, records: SparseCoefficients, n: int, num_blocks: int,
                     record_size: int) -> "BlockEndTable":
        keys = records.temporal.astype(np.int64) * num_blocks + records.block
        counts = np.bincount(keys, minlength=n * num_blocks)
        ends = np.cumsum(counts).reshape(n, num_blocks) * record_size
        return cls(ends.astype(np.uint64))

    def total_bytes(self) -> int:
        return int(self.ends[-1, -1]) if self.ends.size else 0


def block_range_bytes(table: BlockEndTable, temporal_index: int,
                      first_block: int, last_block: int) -> tuple[int, int]:
    """Byte range (relative to coefficient-data start) covering the records
    of blocks [first_block, last_block] for one temporal frame."""
    n, nb = table.ends.shape
    if not (0 <= temporal_index < n):
        raise IndexError(f"temporal index {temporal_index} out of range")
    if not (0 <= first_block <= last_block < nb):
        raise IndexError(f"block range [{first_block},{last_block}] invalid")
    flat = table.ends.reshape(-1)
    start_idx = temporal_index * nb + first_block
    start = int(flat[start_idx - 1]) if start_idx > 0 else 0
    end = int(flat[temporal_index * nb + last_block])
    return start, end


def _record_dtype(header: VideoHeader) -> np.dtype:
    val = "<f4" if header.float_mode else "u1"
    return np.dtype([("off", "<u2"), ("val", val, (header.channels,))])


def _records_bytes(records: SparseCoefficients, header: VideoHeader) -> bytes:
    arr = np.empty(len(records), dtype=_record_dtype(header))
    arr["off"] = records.offset
    arr["val"] = records.values
    return arr.tobytes()


def write_video(video: EncodedVideo, sink) -> int:
    """Serialize an encoded video; returns bytes written.

    ``sink`` is a binary stream or a path.
    """
    if isinstance(sink, (str, bytes)) or hasattr(sink, "__fspath__"):
        with open(sink, "wb") as fh:
            return write_video(video, fh)

    header = VideoHeader(
        width=video.width, height=video.height, frame_count=video.frame_count,
        fps=video.fps, channels=video.channels, levels=video.levels,
        inter_size=video.inter_size, block_size=video.block_size,
        mask_w=video.mask_w, mask_h=video.mask_h, pad_frames=video.pad_frames,
        stereo=video.stereo, float_mode=video.float_mode,
    )
    if len(video.sets) != header.num_sets:
        raise FormatError(
            f"header expects {header.num_sets} sets, got {len(video.sets)}"
        )

    n, nb, rs = header.inter_size, header.num_blocks, header.record_size
    table_size = n * nb * 8
    meta_size = SetMeta.size(n, header.channels)

    payloads = []
    metas = []
    offset = HEADER_SIZE + meta_size * header.num_sets
    for es in video.sets:
        table = BlockEndTable.from_records(es.records, n, nb, rs)
        body = table.pack() + _records_bytes(es.records, header)
        metas.append(SetMeta(offset, len(body), len(es.records), es.extrema))
        payloads.append(body)
        offset += len(body)

    written = 0
    written += sink.write(header.pack())
    for meta in metas:
        written += sink.write(meta.pack())
    for body in payloads:
        written += sink.write(body)
    return written


def read_header(source) -> tuple[VideoHeader, list[SetMeta]]:
    """Parse and validate the header plus the full SetMeta table."""
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        with open(source, "rb") as fh:
            return read_header(fh)
    raw = source.read(HEADER_SIZE)
    header = VideoHeader.unpack(raw)
    meta_size = SetMeta.size(header.inter_size, header.channels)
    metas = []
    prev_end = None
    for i in range(header.num_sets):
        raw = source.read(meta_size)
        if len(raw) < meta_size:
            raise FormatError(f"truncated SetMeta table at entry {i}")
        meta = SetMeta.unpack(raw, header.inter_size, header.channels)
        if prev_end is not None and meta.payload_offset != prev_end:
            raise FormatError("set payloads must be contiguous")
        if meta.record_count * header.record_size > meta.payload_length:
            raise FormatError("record_count inconsistent with payload length")
        prev_end = meta.payload_offset + meta.payload_length
        metas.append(meta)
    return header, metas


def _coalesce(ranges: list[tuple[int, int]], gap: int) -> list[tuple[int, int]]:
    """Merge sorted, possibly adjacent byte ranges, reading through small gaps."""
    merged: list[list[int]] = []
    for start, end in ranges:
        if start >= end:
            continue
        if merged and start - merged[-1][1] <= gap:
            merged[-1][1] = max(merged[-1][1], end)
        else:
            merged.append([start, end])
    return [(a, b) for a, b in merged]


class VideoReader:
    """Read session over one .wvv file.

    Header and metadata are parsed once at open and immutable afterwards.
    ``io_trace`` records (set_index, bytes) for every payload read, which
    tests use to assert keyframe-freedom and cost monotonicity.
    """

    def __init__(self, path):
        self._fh = open(path, "rb")
        self.header, self.set_meta = read_header(self._fh)
        self._tables: dict[int, BlockEndTable] = {}
        self.io_trace: list[tuple[int, int]] = []

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _check_set(self, set_index: int):
        if not (0 <= set_index < self.header.num_sets):
            raise IndexError(f"set index {set_index} out of range")

    def block_table(self, set_index: int) -> BlockEndTable:
        self._check_set(set_index)
        if set_index not in self._tables:
            h = self.header
            size = h.inter_size * h.num_blocks * 8
            self._fh.seek(self.set_meta[set_index].payload_offset)
            raw = self._fh.read(size)
            if len(raw) < size:
                raise FormatError(f"truncated BlockEnd table in set {set_index}")
            self._tables[set_index] = BlockEndTable.unpack(
                raw, h.inter_size, h.num_blocks)
            self.io_trace.append((set_index, size))
        return self._tables[set_index]

    def _data_start(self, set_index: int) -> int:
        h = self.header
        return self.set_meta[set_index].payload_offset + h.inter_size * h.num_blocks * 8

    def _parse_records(self, set_index: int, raw_parts, block_runs) -> SparseCoefficients:
        """Assemble records from raw byte runs plus their (t, block) spans."""
        h = self.header
        table = self.block_table(set_index)
        dt = _record_dtype(h)
        recs = np.frombuffer(b"".join(raw_parts), dtype=dt)
        t_list, b_list = [], []
        for t_idx, first, last in block_runs:
            start, end = block_range_bytes(table, t_idx, first, last)
            count = (end - start) // h.record_size
            ends = table.ends[t_idx, first: last + 1].astype(np.int64)
            prev = start
            counts = np.diff(np.concatenate([[prev], ends])) // h.record_size
            ids = np.repeat(np.arange(first, last + 1), counts)
            t_list.append(np.full(count, t_idx, dtype=np.uint8))
            b_list.append(ids.astype(np.uint32))
        temporal = np.concatenate(t_list) if t_list else np.empty(0, np.uint8)
        blocks = np.concatenate(b_list) if b_list else np.empty(0, np.uint32)
        return SparseCoefficients(
            temporal=temporal, block=blocks,
            offset=recs["off"].astype(np.uint16),
            values=recs["val"].reshape(-1, h.channels),
        )

    def load_blocks(self, set_index: int, block_ids: np.ndarray) -> tuple[SparseCoefficients, int]:
        """Load the records of the given blocks for all temporal frames of
        the set, coalescing nearby ranges. Returns (records, bytes_read)."""
        self._check_set(set_index)
        h = self.header
        table = self.block_table(set_index)
        data_start = self._data_start(set_index)

        ids = np.unique(np.asarray(block_ids, dtype=np.int64))
        if ids.size and (ids[0] < 0 or ids[-1] >= h.num_blocks):
            raise IndexError("block id out of range")
        runs = _id_runs(ids)

        raw_parts, block_runs = [], []
        read_ranges = []
        for t_idx in range(h.inter_size):
            for first, last in runs:
                start, end = block_range_bytes(table, t_idx, first, last)
                block_runs.append((t_idx, first, last))
                read_ranges.append((start, end, len(block_runs) - 1))

        # coalesce reads (amortizing seeks), then slice each requested run
        # back out; bytes_loaded counts only bytes belonging to requested
        # blocks, not the read-through slack between them
        plain = sorted((s, e) for s, e, _ in read_ranges)
        merged = _coalesce(plain, COALESCE_GAP)
        buf: dict[tuple[int, int], bytes] = {}
        read_total = 0
        for start, end in merged:
            self._fh.seek(data_start + start)
            buf[(start, end)] = self._fh.read(end - start)
            read_total += end - start
        total = sum(e - s for s, e in plain)
        self.io_trace.append((set_index, read_total))

        for start, end, _ in sorted(read_ranges, key=lambda r: r[2]):
            chunk = b""
            if end > start:
                for (ms, me), raw in buf.items():
                    if ms <= start and end <= me:
                        chunk = raw[start - ms: end - ms]
                        break
            raw_parts.append(chunk)
        records = self._parse_records(set_index, raw_parts, block_runs)
        return records, total

    def blocks_for_mask(self, pixel_mask: np.ndarray) -> np.ndarray:
        """Block ids intersecting the dependency-closed coefficient footprint
        of a full-resolution pixel mask."""
        h = self.header
        masks = LevelMaskSet.from_pixel_mask(pixel_mask, h.levels, WaveletKind.CDF97)
        incl = masks.inclusion_grid(h.width, h.height)
        bs = h.block_size
        per_block = incl.reshape(h.blocks_y, bs, h.blocks_x, bs).any(axis=(1, 3))
        return np.nonzero(per_block.reshape(-1))[0]

    def load_for_mask(self, set_index: int, mask: np.ndarray) -> tuple[SparseCoefficients, int]:
        """Load every block whose extent intersects the mask's frame-space
        footprint after per-level dependency closure.

        ``mask`` is the low-resolution viewport grid (mask_h, mask_w).
        """
        h = self.header
        if mask.shape != (h.mask_h, h.mask_w):
            raise FormatError(
                f"mask dims {mask.shape} != header ({h.mask_h}, {h.mask_w})"
            )
        pixel_mask = upscale_mask(mask, h.width, h.height)
        return self.load_blocks(set_index, self.blocks_for_mask(pixel_mask))

    def load_all(self, set_index: int) -> tuple[SparseCoefficients, int]:
        return self.load_blocks(set_index, np.arange(self.header.num_blocks))


def _id_runs(ids: np.ndarray) -> list[tuple[int, int]]:
    """Split sorted unique ids into [first, last] contiguous runs."""
    if ids.size == 0:
        return []
    breaks = np.nonzero(np.diff(ids) > 1)[0]
    starts = np.concatenate([[0], breaks + 1])
    ends = np.concatenate([breaks, [ids.size - 1]])
    return [(int(ids[a]), int(ids[b])) for a, b in zip(starts, ends)]


def upscale_mask(mask: np.ndarray, width: int, height: int) -> np.ndarray:
    """Nearest-neighbour upscale of a low-res mask to frame resolution."""
    mask = np.asarray(mask, dtype=bool)
    mh, mw = mask.shape
    rows = (np.arange(height) * mh) // height
    cols = (np.arange(width) * mw) // width
    return mask[rows[:, None], cols[None, :]]
