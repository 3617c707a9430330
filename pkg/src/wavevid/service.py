"""HTTP stream service: viewport-dependent decoding behind a local API.

Endpoints (one open video per process):

    GET /info                  header fields as JSON
    GET /frame/{t}?yaw&pitch&roll&fov_h&fov_v&w&h&foveate&gaze_u&gaze_v
                               lossless PNG of the requested perspective view,
                               stats in X-Bytes-Loaded / X-Records / X-Decode-Ms
    GET /stats                 aggregate service counters as JSON

Passing ``session=<token>`` keeps a DecodeSession alive between requests so
sequential playback reuses the set cache and prefetch; anonymous requests
decode cold. Responses depend only on (file, request), never on history.
"""
from __future__ import annotations

import io
import threading
from contextlib import asynccontextmanager

import numpy as np
from fastapi import FastAPI, HTTPException, Query, Response
from fastapi.middleware.cors import CORSMiddleware

from .decoding import CorruptStreamError, DecodeError, DecodeSession, FoveationSchedule
from .projection import CameraPose, ProjectionError, render_perspective, viewport_to_mask

MAX_OUTPUT_DIM = 4096


def _png_bytes(img: np.ndarray) -> bytes:
    from PIL import Image

    if img.ndim == 3 and img.shape[2] == 1:
        img = img[..., 0]
    buf = io.BytesIO()
    Image.fromarray(img).save(buf, format="PNG")
    return buf.getvalue()


class _SessionPool:
    """One DecodeSession per client token, requests per token serialized."""

    def __init__(self, path):
        self.path = path
        self._lock = threading.Lock()
        self._sessions: dict[str, tuple[DecodeSession, threading.Lock]] = {}

    def get(self, token: str) -> tuple[DecodeSession, threading.Lock]:
        with self._lock:
            if token not in self._sessions:
                self._sessions[token] = (DecodeSession(self.path), threading.Lock())
            return self._sessions[token]

    def close(self):
        with self._lock:
            for session, _ in self._sessions.values():
                session.close()
            self._sessions.clear()


def create_app(path) -> FastAPI:
    """Build the service around one ``.wvv`` file."""
    probe = DecodeSession(path)
    header = probe.header
    probe.close()

    pool = _SessionPool(path)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        pool.close()

    app = FastAPI(title="wavevid stream service", lifespan=lifespan)
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
        allow_headers=["*"], expose_headers=["*"],
    )
    app.state.pool = pool
    counters = {"requests": 0, "bytes_loaded": 0, "records": 0}
    counters_lock = threading.Lock()

    @app.get("/info")
    def info():
        return {
            "width": header.width,
            "height": header.height,
            "frame_count": header.frame_count,
            "fps": header.fps,
            "channels": header.channels,
            "levels": header.levels,
            "inter_size": header.inter_size,
            "block_size": header.block_size,
            "mask_w": header.mask_w,
            "mask_h": header.mask_h,
            "stereo": header.stereo,
            "float_mode": header.float_mode,
        }

    @app.get("/frame/{t}")
    def frame(
        t: int,
        yaw: float = Query(0.0),
        pitch: float = Query(0.0),
        roll: float = Query(0.0),
        fov_h: float = Query(90.0),
        fov_v: float = Query(90.0),
        w: int = Query(960),
        h: int = Query(960),
        foveate: int = Query(0),
        gaze_u: float = Query(0.5),
        gaze_v: float = Query(0.5),
        session: str = Query(""),
    ):
        if not (0 <= t < header.frame_count):
            raise HTTPException(404, f"frame {t} outside [0, {header.frame_count})")
        if not (0 < w <= MAX_OUTPUT_DIM and 0 < h <= MAX_OUTPUT_DIM):
            raise HTTPException(400, f"output dims {w}x{h} outside (0, {MAX_OUTPUT_DIM}]")
        if not (0.0 <= gaze_u <= 1.0 and 0.0 <= gaze_v <= 1.0):
            raise HTTPException(400, "gaze coordinates must lie in [0, 1]")
        try:
            pose = CameraPose(yaw=yaw, pitch=pitch, roll=roll, fov_h=fov_h, fov_v=fov_v)
            if not (pose.fov_h < 180 and pose.fov_v < 180):
                raise HTTPException(400, "perspective output requires FOV < 180")
        except ProjectionError as exc:
            raise HTTPException(400, str(exc)) from exc

        def decode(ses: DecodeSession):
            mask = viewport_to_mask(pose, (header.mask_w, header.mask_h))
            if foveate:
                schedule = FoveationSchedule.default(header.levels, gaze_u, gaze_v)
                pixels, footprint, stats = ses.decode_foveated(t, mask, schedule)
                # periphery carries a coarse reconstruction; render all of it
                footprint = np.ones_like(footprint)
            else:
                pixels, footprint, stats = ses.decode_viewport(t, mask)
            image = render_perspective(pixels, footprint, pose, (w, h))
            return image, stats

        try:
            if session:
                ses, lock = pool.get(session)
                with lock:
                    image, stats = decode(ses)
            else:
                with DecodeSession(path) as ses:
                    image, stats = decode(ses)
        except CorruptStreamError as exc:
            raise HTTPException(500, str(exc)) from exc
        except DecodeError as exc:
            raise HTTPException(400, str(exc)) from exc

        with counters_lock:
            counters["requests"] += 1
            counters["bytes_loaded"] += stats.bytes_loaded
            counters["records"] += stats.records_processed

        return Response(
            content=_png_bytes(image),
            media_type="image/png",
            headers={
                "X-Bytes-Loaded": str(stats.bytes_loaded),
                "X-Records": str(stats.records_processed),
                "X-Decode-Ms": f"{stats.decode_ms:.3f}",
            },
        )

    @app.get("/stats")
    def stats():
        with counters_lock:
            body = dict(counters)
        body["sessions"] = len(pool._sessions)
        return body

    return app
