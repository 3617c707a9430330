"""Command-line entry points: encode, decode, inspect, bench, serve.

Exit codes: 0 success, 1 usage error, 2 data error. The WAVEVID_THREADS
environment variable caps encoder worker count (0 or unset = auto).
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .bench import BenchError, TrajectoryLog, replay
from .decoding import DecodeError, DecodeSession, FoveationSchedule
from .encoding import EncodeError, EncodeParams, MappingKind, encode_video
from .fileio import FormatError, VideoReader, write_video
from .projection import CameraPose, ProjectionError, render_perspective, viewport_to_mask

USAGE_EXIT = 1
DATA_EXIT = 2


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the CLI contract wants 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_EXIT)


def _load_frames(path: Path) -> np.ndarray:
    """Frames from a .npy stack (F, M, N[, C]) or a directory of images in
    lexicographic order."""
    from PIL import Image

    if path.is_file() and path.suffix == ".npy":
        arr = np.load(path)
        if arr.ndim == 3:
            arr = arr[..., None]
        return arr.astype(np.uint8)
    if not path.is_dir():
        raise FormatError(f"input {path} is neither a directory nor a .npy stack")
    files = sorted(
        p for p in path.iterdir()
        if p.suffix.lower() in (".png", ".bmp", ".tif", ".tiff")
    )
    if not files:
        raise FormatError(f"no image frames found in {path}")
    frames = [np.asarray(Image.open(p).convert("RGB")) for p in files]
    shapes = {f.shape for f in frames}
    if len(shapes) != 1:
        raise FormatError(f"frame dimensions differ: {sorted(shapes)}")
    return np.stack(frames)


def _save_image(img: np.ndarray, path: Path) -> None:
    from PIL import Image

    if img.ndim == 3 and img.shape[2] == 1:
        img = img[..., 0]
    Image.fromarray(img).save(path)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wavevid", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    enc = sub.add_parser("encode", help="encode image frames into a .wvv video")
    enc.add_argument("--input", required=True, type=Path,
                     help="frame directory (lexicographic order) or .npy stack")
    enc.add_argument("--output", required=True, type=Path, help="output .wvv path")
    enc.add_argument("--alpha", type=float, default=0.1,
                     help="intra threshold strength; published HQ 0.1, LQ 0.25 (default 0.1)")
    enc.add_argument("--inter-threshold", type=float, default=0.005,
                     help="temporal detail threshold (default 0.005)")
    enc.add_argument("--levels", default="auto",
                     help="wavelet levels, or 'auto' = log2(width/32) - 2 "
                          "clamped to [1, log2(min dim)] (default auto)")
    enc.add_argument("--inter-size", type=int, default=4,
                     help="frames per temporal set, power of two (default 4)")
    enc.add_argument("--block", type=int, default=32,
                     help="coefficient block edge, power of two (default 32)")
    enc.add_argument("--no-quantize", action="store_true",
                     help="store float32 coefficients (lossless debug mode)")
    enc.add_argument("--mapping", choices=("equirectangular", "none"),
                     default="equirectangular",
                     help="latitude mapping factor in the threshold (default equirectangular)")
    enc.add_argument("--fps", type=float, default=30.0, help="playback rate (default 30)")
    enc.add_argument("--stereo", action="store_true",
                     help="frames are top-bottom stereo pairs")

    dec = sub.add_parser("decode", help="decode one frame to an image")
    dec.add_argument("--input", required=True, type=Path)
    dec.add_argument("--frame", required=True, type=int, help="display frame index")
    dec.add_argument("--out", required=True, type=Path, help="output image path")
    dec.add_argument("--yaw", type=float, default=0.0)
    dec.add_argument("--pitch", type=float, default=0.0)
    dec.add_argument("--roll", type=float, default=0.0)
    dec.add_argument("--fov-h", type=float, default=360.0,
                     help="horizontal FOV; 360 = full equirectangular output (default)")
    dec.add_argument("--fov-v", type=float, default=180.0)
    dec.add_argument("--width", type=int, default=960, help="perspective output width")
    dec.add_argument("--height", type=int, default=960, help="perspective output height")
    dec.add_argument("--foveate", action="store_true",
                     help="apply the default gaze-contingent level schedule")
    dec.add_argument("--gaze-u", type=float, default=0.5)
    dec.add_argument("--gaze-v", type=float, default=0.5)

    ins = sub.add_parser("inspect", help="print header and per-set statistics")
    ins.add_argument("--input", required=True, type=Path)

    ben = sub.add_parser("bench", help="replay a head trajectory and report decode cost")
    ben.add_argument("--input", required=True, type=Path)
    ben.add_argument("--trajectory", required=True, type=Path,
                     help="CSV with header t_ms,yaw,pitch,roll,gaze_u,gaze_v")
    ben.add_argument("--mode", choices=("full", "viewport", "foveated"),
                     default="viewport")
    ben.add_argument("--reference", type=Path,
                     help="reference frames (dir or .npy) for PSNR/SSIM")
    ben.add_argument("--max-frames", type=int)
    ben.add_argument("--json", type=Path, help="also write the report as JSON")

    srv = sub.add_parser("serve", help="serve the video over HTTP")
    srv.add_argument("--input", required=True, type=Path)
    srv.add_argument("--port", type=int, default=8080)
    srv.add_argument("--host", default="127.0.0.1")
    return parser


def _cmd_encode(args) -> int:
    frames = _load_frames(args.input)
    if args.levels == "auto":
        levels = None
    else:
        try:
            levels = int(args.levels)
        except ValueError:
            print(f"wavevid encode: --levels must be an integer or 'auto', "
                  f"got {args.levels!r}", file=sys.stderr)
            return USAGE_EXIT
    params = EncodeParams(
        alpha=args.alpha,
        inter_threshold=args.inter_threshold,
        levels=levels,
        inter_size=args.inter_size,
        block_size=args.block,
        quantize=not args.no_quantize,
        mapping=MappingKind[args.mapping.upper()],
        fps=args.fps,
        stereo=args.stereo,
    )
    video = encode_video(frames, params)
    written = write_video(video, args.output)
    raw = frames.nbytes
    print(f"{args.output}: {written} bytes, {frames.shape[0]} frames, "
          f"ratio {raw / written:.1f}:1")
    return 0


def _cmd_decode(args) -> int:
    with DecodeSession(args.input) as session:
        h = session.header
        full_sphere = args.fov_h >= 360.0 or args.fov_v >= 180.0
        if full_sphere:
            pixels, footprint, stats = session.decode_full(args.frame)
            out = pixels
        else:
            pose = CameraPose(yaw=args.yaw, pitch=args.pitch, roll=args.roll,
                              fov_h=args.fov_h, fov_v=args.fov_v)
            mask = viewport_to_mask(pose, (h.mask_w, h.mask_h))
            if args.foveate:
                schedule = FoveationSchedule.default(h.levels, args.gaze_u, args.gaze_v)
                pixels, footprint, stats = session.decode_foveated(args.frame, mask, schedule)
                # periphery is a valid coarse reconstruction, render it all
                footprint = np.ones_like(footprint)
            else:
                pixels, footprint, stats = session.decode_viewport(args.frame, mask)
            out = render_perspective(pixels, footprint, pose, (args.width, args.height))
        _save_image(out, args.out)
        print(f"{args.out}: frame {args.frame}, {stats.bytes_loaded} bytes loaded, "
              f"{stats.records_processed} records, {stats.decode_ms:.1f} ms")
    return 0


def _cmd_inspect(args) -> int:
    with VideoReader(args.input) as reader:
        h = reader.header
        print(f"file          {args.input}")
        print(f"dimensions    {h.width}x{h.height}  channels {h.channels}")
        print(f"frames        {h.frame_count}  (+{h.pad_frames} pad)  fps {h.fps:g}")
        print(f"levels        {h.levels}  inter_size {h.inter_size}  "
              f"block {h.block_size}  mask {h.mask_w}x{h.mask_h}")
        print(f"mode          {'float debug' if h.float_mode else 'quantized u8'}"
              f"{'  stereo' if h.stereo else ''}")
        print(f"sets          {h.num_sets}  record size {h.record_size} bytes")
        for i, meta in enumerate(reader.set_meta):
            print(f"  set {i}: {meta.record_count} records, "
                  f"{meta.payload_length} bytes at offset {meta.payload_offset}")
    return 0


def _cmd_bench(args) -> int:
    trajectory = TrajectoryLog.load(args.trajectory)
    reference = _load_frames(args.reference) if args.reference else None
    report = replay(args.input, trajectory, mode=args.mode,
                    reference=reference, max_frames=args.max_frames)
    print(report.to_text())
    if args.json:
        report.save_json(args.json)
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(args.input)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


_COMMANDS = {
    "encode": _cmd_encode,
    "decode": _cmd_decode,
    "inspect": _cmd_inspect,
    "bench": _cmd_bench,
    "serve": _cmd_serve,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else USAGE_EXIT
    try:
        return _COMMANDS[args.command](args)
    except (FormatError, EncodeError, DecodeError, BenchError, ProjectionError,
            FileNotFoundError, IsADirectoryError) as exc:
        print(f"wavevid {args.command}: {exc}", file=sys.stderr)
        return DATA_EXIT


def main() -> None:
    raise SystemExit(run())


if __name__ == "__main__":
    main()
