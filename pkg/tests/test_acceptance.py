"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

All checks run on 512x512, 16-frame synthetic clips. Tolerances are stated
inline; run with ``pytest -s tests/test_acceptance.py`` to see the verdict
lines.
"""
import os
import time

import numpy as np
import pytest

from wavevid.bench import make_synthetic_clip, psnr, ssim
from wavevid.decoding import DecodeSession, FoveationSchedule, temporal_inverse_sparse
from wavevid.encoding import (
    EncodeParams,
    InterFrameSet,
    MappingKind,
    compute_extrema,
    encode_video,
    haar_time_inverse,
    quantize,
)
from wavevid.fileio import write_video
from wavevid.projection import CameraPose, viewport_to_mask

SIZE = 512
FRAMES = 16
LEVELS = 5  # deep enough that the approximation band stays small


def _verdict(name: str, ok: bool, detail: str) -> None:
    print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


@pytest.fixture(scope="module")
def clip():
    return make_synthetic_clip(FRAMES, SIZE)


def _encode(clip, path, **overrides):
    params = EncodeParams(**{
        "levels": LEVELS, "mapping": MappingKind.NONE, **overrides})
    start = time.perf_counter()
    write_video(encode_video(clip, params), path)
    return time.perf_counter() - start


@pytest.fixture(scope="module")
def hq_file(clip, tmp_path_factory):
    path = tmp_path_factory.mktemp("acc") / "hq.wvv"
    _encode(clip, path, alpha=0.1, inter_threshold=0.005)
    return path


@pytest.fixture(scope="module")
def lq_file(clip, tmp_path_factory):
    path = tmp_path_factory.mktemp("acc") / "lq.wvv"
    _encode(clip, path, alpha=0.25, inter_threshold=0.005)
    return path


def test_lossless_path(clip, tmp_path_factory):
    """alpha=0, inter_threshold=0, float debug mode: max error <= 1 level,
    PSNR >= 60 dB, total runtime < 10 s."""
    path = tmp_path_factory.mktemp("acc") / "lossless.wvv"
    start = time.perf_counter()
    _encode(clip, path, alpha=0.0, inter_threshold=0.0, quantize=False)
    max_err, worst_psnr = 0, 99.0
    with DecodeSession(path) as session:
        for frame in (0, 7, 15):
            pixels, _, _ = session.decode_full(frame)
            max_err = max(max_err, int(np.abs(
                pixels.astype(int) - clip[frame].astype(int)).max()))
            worst_psnr = min(worst_psnr, psnr(pixels, clip[frame]))
    elapsed = time.perf_counter() - start
    ok = max_err <= 1 and worst_psnr >= 60.0 and elapsed < 10.0
    _verdict("lossless-path", ok,
             f"max_err={max_err} (<=1), psnr={worst_psnr:.1f} dB (>=60), "
             f"runtime={elapsed:.1f} s (<10)")


def test_quantized_near_lossless(clip, hq_file):
    """Quantized HQ decode: PSNR >= 40 dB, runtime < 10 s."""
    start = time.perf_counter()
    with DecodeSession(hq_file) as session:
        scores = [psnr(session.decode_full(f)[0], clip[f]) for f in (0, 8, 15)]
    elapsed = time.perf_counter() - start
    worst = min(scores)
    ok = worst >= 40.0 and elapsed < 10.0
    _verdict("quantized-near-lossless", ok,
             f"psnr={worst:.1f} dB (>=40), runtime={elapsed:.1f} s (<10)")


def test_roi_exactness(hq_file):
    """100 random masks: footprint pixels bit-identical to a full decode.
    Runtime < 60 s."""
    rng = np.random.default_rng(99)
    start = time.perf_counter()
    mismatches = 0
    with DecodeSession(hq_file) as ref_session:
        full, _, _ = ref_session.decode_full(3)
    with DecodeSession(hq_file) as session:
        for _ in range(100):
            mask = np.zeros((64, 64), dtype=bool)
            w, h = rng.integers(4, 40, 2)
            x, y = rng.integers(0, 64 - w), rng.integers(0, 64 - h)
            mask[y:y + h, x:x + w] = True
            pixels, footprint, _ = session.decode_viewport(3, mask)
            if not (pixels[footprint] == full[footprint]).all():
                mismatches += 1
    elapsed = time.perf_counter() - start
    ok = mismatches == 0 and elapsed < 60.0
    _verdict("roi-exactness", ok,
             f"mismatching masks={mismatches}/100 (0), "
             f"runtime={elapsed:.1f} s (<60)")


def test_temporal_oracle():
    """Sparse reconstruction equals the dense temporal inverse at every
    record position, all t, n in {1,2,4,8}, exact. Runtime < 10 s."""
    rng = np.random.default_rng(7)
    start = time.perf_counter()
    worst = 0.0
    for n in (1, 2, 4, 8):
        data = rng.normal(size=(n, 64, 64, 3)).astype(np.float32)
        data[np.abs(data) < 0.8] = 0
        s = InterFrameSet(data, 2)
        s.extrema = compute_extrema(s)
        records = quantize(s, 32, float_mode=True)
        dense = haar_time_inverse(data)
        for t in range(n):
            pyr = temporal_inverse_sparse(records, s.extrema, t, 64, 64, 2,
                                          n, 32, 3)
            worst = max(worst, float(np.abs(pyr.data - dense[t]).max()))
    elapsed = time.perf_counter() - start
    ok = worst == 0.0 and elapsed < 10.0
    _verdict("temporal-oracle", ok,
             f"max |sparse - dense|={worst} (exact), "
             f"runtime={elapsed:.1f} s (<10)")


def test_keyframe_freedom(hq_file):
    """Random seeks read exactly one inter-frame set per decoded frame."""
    mask = np.ones((64, 64), dtype=bool)
    order = [13, 2, 9, 0, 15, 6]
    violations = 0
    with DecodeSession(hq_file) as session:
        n = session.header.inter_size
        for frame in order:
            before = len(session.reader.io_trace)
            session.decode_viewport(frame, mask)
            touched = {e[0] for e in session.reader.io_trace[before:]}
            if not touched <= {frame // n}:
                violations += 1
    ok = violations == 0
    _verdict("keyframe-freedom", ok,
             f"seeks touching foreign sets={violations}/{len(order)} (0)")


def test_quality_ordering(clip, hq_file, lq_file):
    """PSNR(alpha=0.1) > PSNR(alpha=0.25); ratio(LQ) > ratio(HQ)."""
    with DecodeSession(hq_file) as s:
        hq_psnr = psnr(s.decode_full(0)[0], clip[0])
    with DecodeSession(lq_file) as s:
        lq_psnr = psnr(s.decode_full(0)[0], clip[0])
    hq_ratio = clip.nbytes / os.path.getsize(hq_file)
    lq_ratio = clip.nbytes / os.path.getsize(lq_file)
    ok = hq_psnr > lq_psnr and lq_ratio > hq_ratio
    _verdict("quality-ordering", ok,
             f"psnr HQ {hq_psnr:.1f} > LQ {lq_psnr:.1f}; "
             f"ratio LQ {lq_ratio:.1f} > HQ {hq_ratio:.1f}")


def test_compression_magnitude(clip, hq_file):
    """HQ params on the smooth synthetic clip reach >= 20:1 vs raw."""
    ratio = clip.nbytes / os.path.getsize(hq_file)
    ok = ratio >= 20.0
    _verdict("compression-magnitude", ok, f"ratio={ratio:.1f}:1 (>=20:1)")


def test_foveation_savings(hq_file):
    """Default schedule on a 90-degree viewport loads >= 50% fewer bytes
    than the full-viewport decode."""
    pose = CameraPose(yaw=30, pitch=10, fov_h=90, fov_v=90)
    mask = viewport_to_mask(pose, (64, 64))
    with DecodeSession(hq_file) as s:
        _, _, viewport = s.decode_viewport(0, mask)
    with DecodeSession(hq_file) as s:
        schedule = FoveationSchedule.default(s.header.levels)
        _, _, foveated = s.decode_foveated(0, mask, schedule)
    saving = 1.0 - foveated.bytes_loaded / viewport.bytes_loaded
    ok = saving >= 0.5
    _verdict("foveation-savings", ok,
             f"bytes {foveated.bytes_loaded} vs {viewport.bytes_loaded}, "
             f"saving={saving:.0%} (>=50%)")


def test_cost_monotonicity(hq_file):
    """Decode time and bytes non-decreasing over 25% -> 50% -> 100% masks,
    medians over 20 runs."""
    masks = []
    for frac in (0.25, 0.5, 1.0):
        m = np.zeros((64, 64), dtype=bool)
        edge = int(round(64 * np.sqrt(frac)))
        m[:edge, :edge] = True
        masks.append(m)
    med_bytes, med_ms = [], []
    for mask in masks:
        times, sizes = [], []
        for _ in range(20):
            with DecodeSession(hq_file) as session:
                start = time.perf_counter()
                _, _, stats = session.decode_viewport(5, mask)
                times.append((time.perf_counter() - start) * 1000)
                sizes.append(stats.bytes_loaded)
        med_bytes.append(float(np.median(sizes)))
        med_ms.append(float(np.median(times)))
    ok = med_bytes == sorted(med_bytes) and med_ms == sorted(med_ms)
    _verdict("cost-monotonicity", ok,
             f"median bytes {med_bytes}, median ms "
             f"{[round(t, 1) for t in med_ms]} (both non-decreasing)")


def test_format_golden_files():
    """Three frozen .wvv files parse to field-identical structures; any
    byte drift fails. Delegates to the bitstream golden checks."""
    import subprocess
    import sys
    proc = subprocess.run(
        [sys.executable, "-m", "pytest", "-q",
         os.path.join(os.path.dirname(__file__), "test_bitstream.py"),
         "-k", "TestGoldenFiles"],
        capture_output=True, text=True)
    ok = proc.returncode == 0
    tail = proc.stdout.strip().splitlines()[-1] if proc.stdout else ""
    _verdict("format-golden-files", ok, tail or "golden subset failed")


def test_metric_self_test():
    """PSNR closed-form case 24.05 +/- 0.01 dB; SSIM identical-image = 1.0."""
    a = np.zeros((64, 64), dtype=np.uint8)
    b = np.full((64, 64), 16, dtype=np.uint8)
    got = psnr(a, b)
    img = np.arange(64 * 64, dtype=np.uint8).reshape(64, 64)
    s = ssim(img, img)
    ok = abs(got - 24.05) <= 0.01 and s == pytest.approx(1.0)
    _verdict("metric-self-test", ok,
             f"psnr={got:.4f} dB (24.05 +/- 0.01), ssim(identical)={s:.6f} (1.0)")
