"""Objective quality metrics and trajectory-replay benchmarking."""
from __future__ import annotations

import json
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .decoding import DecodeSession, FoveationSchedule
from .projection import CameraPose, viewport_to_mask

PSNR_CAP = 99.0


class BenchError(ValueError):
    pass


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB over 8-bit data; identical images
    report the cap 99.0."""
    if a.shape != b.shape:
        raise BenchError(f"shape mismatch: {a.shape} vs {b.shape}")
    mse = np.mean((a.astype(np.float64) - b.astype(np.float64)) ** 2)
    if mse == 0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * math.log10(255.0 ** 2 / mse))


def _luminance(img: np.ndarray) -> np.ndarray:
    img = img.astype(np.float64)
    return img.mean(axis=2) if img.ndim == 3 else img


def _window_means(x: np.ndarray, w: int) -> np.ndarray:
    """Means of all w-by-w sliding windows via a 2D integral image."""
    ii = np.cumsum(np.cumsum(x, axis=0), axis=1)
    ii = np.pad(ii, ((1, 0), (1, 0)))
    s = ii[w:, w:] - ii[:-w, w:] - ii[w:, :-w] + ii[:-w, :-w]
    return s / (w * w)


def ssim(a: np.ndarray, b: np.ndarray, window: int = 8,
         k1: float = 0.01, k2: float = 0.03) -> float:
    """Mean structural similarity over sliding windows of the luminance
    (channel mean), with the standard stabilization constants."""
    if a.shape != b.shape:
        raise BenchError(f"shape mismatch: {a.shape} vs {b.shape}")
    x = _luminance(a)
    y = _luminance(b)
    if min(x.shape) < window:
        raise BenchError(f"image smaller than {window}x{window} window")
    c1 = (k1 * 255.0) ** 2
    c2 = (k2 * 255.0) ** 2

    mx = _window_means(x, window)
    my = _window_means(y, window)
    mxx = _window_means(x * x, window)
    myy = _window_means(y * y, window)
    mxy = _window_means(x * y, window)
    vx = mxx - mx * mx
    vy = myy - my * my
    cov = mxy - mx * my

    num = (2 * mx * my + c1) * (2 * cov + c2)
    den = (mx * mx + my * my + c1) * (vx + vy + c2)
    return float(np.mean(num / den))


@dataclass
class TrajectoryLog:
    """Head/gaze samples: (t_ms, yaw, pitch, roll, gaze_u, gaze_v)."""

    samples: np.ndarray  # (S, 6) float64

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64)
        if s.ndim != 2 or s.shape[1] != 6 or s.shape[0] == 0:
            raise BenchError("trajectory must be a non-empty (S, 6) table")
        if np.any(np.diff(s[:, 0]) <= 0):
            raise BenchError("timestamps must be strictly increasing")
        self.samples = s

    @classmethod
    def load(cls, path) -> "TrajectoryLog":
        with open(path) as fh:
            header = fh.readline().strip()
            if header != "t_ms,yaw,pitch,roll,gaze_u,gaze_v":
                raise BenchError(f"bad trajectory header: {header!r}")
            rows = [
                [float(v) for v in line.split(",")]
                for line in fh
                if line.strip()
            ]
        return cls(np.asarray(rows))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("t_ms,yaw,pitch,roll,gaze_u,gaze_v\n")
            for row in self.samples:
                fh.write(",".join(f"{v:.10g}" for v in row) + "\n")

    def sample_at(self, t_ms: float) -> np.ndarray:
        """Step interpolation: latest sample at or before t_ms."""
        idx = int(np.searchsorted(self.samples[:, 0], t_ms, side="right")) - 1
        return self.samples[max(idx, 0)]


@dataclass
class BenchReport:
    mode: str
    frame_ms: list = field(default_factory=list)
    frame_bytes: list = field(default_factory=list)
    frame_records: list = field(default_factory=list)
    psnr_db: float | None = None
    ssim_score: float | None = None
    compression_ratio: float | None = None

    @property
    def fps(self) -> float:
        mean = np.mean(self.frame_ms) if self.frame_ms else 0.0
        return 1000.0 / mean if mean > 0 else 0.0

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "frames": len(self.frame_ms),
            "fps": self.fps,
            "mean_ms": float(np.mean(self.frame_ms)) if self.frame_ms else 0.0,
            "total_bytes": int(np.sum(self.frame_bytes)),
            "total_records": int(np.sum(self.frame_records)),
            "frame_bytes": [int(b) for b in self.frame_bytes],
            "frame_records": [int(r) for r in self.frame_records],
            "psnr_db": self.psnr_db,
            "ssim": self.ssim_score,
            "compression_ratio": self.compression_ratio,
        }

    def to_text(self) -> str:
        d = self.to_dict()
        keys = ("mode", "frames", "fps", "mean_ms", "total_bytes",
                "total_records", "psnr_db", "ssim", "compression_ratio")
        return "\n".join(f"{k}={d[k]}" for k in keys)

    def save_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)


def replay(video_path, trajectory: TrajectoryLog, mode: str = "viewport",
           reference: np.ndarray | None = None,
           max_frames: int | None = None) -> BenchReport:
    """Decode every display frame under the trajectory's pose/gaze.

    ``mode`` is full, viewport, or foveated. When ``reference`` frames
    (F, M, N, C) are given, PSNR/SSIM are computed over the decoded
    footprint region of each frame.
    """
    if mode not in ("full", "viewport", "foveated"):
        raise BenchError(f"unknown mode {mode!r}")
    report = BenchReport(mode=mode)
    psnrs, ssims = [], []
    with DecodeSession(video_path) as session:
        h = session.header
        count = h.frame_count if max_frames is None else min(max_frames, h.frame_count)
        for frame in range(count):
            t_ms = frame * 1000.0 / h.fps if h.fps > 0 else 0.0
            _, yaw, pitch, roll, gu, gv = trajectory.sample_at(t_ms)
            pose = CameraPose(yaw=yaw, pitch=pitch, roll=roll)
            mask = (
                np.ones((h.mask_h, h.mask_w), dtype=bool)
                if mode == "full"
                else viewport_to_mask(pose, (h.mask_w, h.mask_h))
            )
            t0 = time.perf_counter()
            if mode == "foveated":
                schedule = FoveationSchedule.default(h.levels, gu, gv)
                pixels, footprint, stats = session.decode_foveated(frame, mask, schedule)
            else:
                pixels, footprint, stats = session.decode_viewport(frame, mask)
            elapsed = (time.perf_counter() - t0) * 1000.0
            report.frame_ms.append(elapsed)
            report.frame_bytes.append(stats.bytes_loaded)
            report.frame_records.append(stats.records_processed)
            if reference is not None:
                ref = reference[frame]
                if footprint.any():
                    psnrs.append(psnr(pixels[footprint], ref[footprint]))
                    if mode == "full":
                        ssims.append(ssim(pixels, ref))
        raw = h.width * h.height * h.channels * h.frame_count
        file_size = os.path.getsize(video_path)
        report.compression_ratio = raw / file_size if file_size else None
    if psnrs:
        report.psnr_db = float(np.mean(psnrs))
    if ssims:
        report.ssim_score = float(np.mean(ssims))
    return report


def make_synthetic_clip(frames: int = 16, size: int = 512, channels: int = 3,
                        seed: int = 7) -> np.ndarray:
    """Desk-scale test content: drifting smooth gradients plus a few moving
    shapes, (F, size, size, channels) uint8."""
    rng = np.random.default_rng(seed)
    yy, xx = np.meshgrid(
        np.linspace(0, 2 * np.pi, size, endpoint=False),
        np.linspace(0, 2 * np.pi, size, endpoint=False),
        indexing="ij",
    )
    phases = rng.uniform(0, 2 * np.pi, size=(channels, 2))
    shape_pos = rng.uniform(0.2, 0.8, size=(3, 2))
    shape_vel = rng.uniform(-0.01, 0.01, size=(3, 2))
    shape_col = rng.integers(60, 255, size=(3, channels))

    clip = np.empty((frames, size, size, channels), dtype=np.uint8)
    for f in range(frames):
        drift = 2 * np.pi * f / max(frames, 1) * 0.1
        img = np.empty((size, size, channels), dtype=np.float64)
        for c in range(channels):
            img[..., c] = (
                0.5
                + 0.25 * np.sin(yy + phases[c, 0] + drift)
                + 0.25 * np.cos(xx + phases[c, 1] - drift)
            )
        img = np.clip(img, 0, 1) * 255.0
        for i in range(3):
            cy, cx = (shape_pos[i] + f * shape_vel[i]) % 1.0
            r = size * (0.05 + 0.02 * i)
            dy = np.arange(size)[:, None] - cy * size
            dx = np.arange(size)[None, :] - cx * size
            inside = dy * dy + dx * dx < r * r
            img[inside] = shape_col[i]
        clip[f] = np.clip(np.rint(img), 0, 255).astype(np.uint8)
    return clip


def circle_trajectory(duration_ms: float = 2000.0, steps: int = 20) -> TrajectoryLog:
    """Simple synthetic head path sweeping yaw with mild pitch motion."""
    t = np.linspace(0, duration_ms, steps)
    yaw = np.linspace(-60, 60, steps)
    pitch = 15 * np.sin(np.linspace(0, np.pi, steps))
    rows = np.stack([
        t, yaw, pitch, np.zeros(steps),
        np.full(steps, 0.5), np.full(steps, 0.5),
    ], axis=1)
    return TrajectoryLog(rows)
