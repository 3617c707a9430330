"""Sphere <-> equirectangular frame geometry.

Conventions: world x points east, y up, z forward (lon 0, lat 0). Longitude
grows eastward across the frame (x axis), latitude is +90 at row 0 (north
pole). Poses rotate yaw about y, then pitch about x, then roll about z.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class ProjectionError(ValueError):
    pass


class CoverageError(ProjectionError):
    """Perspective sampling hit a pixel outside the decoded footprint."""


@dataclass
class CameraPose:
    yaw: float = 0.0
    pitch: float = 0.0
    roll: float = 0.0
    fov_h: float = 90.0
    fov_v: float = 90.0

    def __post_init__(self):
        if not 0 < self.fov_h <= 360:
            raise ProjectionError(f"fov_h {self.fov_h} outside (0, 360]")
        if not 0 < self.fov_v <= 180:
            raise ProjectionError(f"fov_v {self.fov_v} outside (0, 180]")
        if not -90 <= self.pitch <= 90:
            raise ProjectionError(f"pitch {self.pitch} outside [-90, 90]")

    def rotation(self) -> np.ndarray:
        """World-from-camera rotation matrix."""
        y, p, r = (math.radians(a) for a in (self.yaw, self.pitch, self.roll))
        ry = np.array([[math.cos(y), 0, math.sin(y)],
                       [0, 1, 0],
                       [-math.sin(y), 0, math.cos(y)]])
        # positive pitch tilts the camera up: forward -> (0, sin p, cos p)
        rx = np.array([[1, 0, 0],
                       [0, math.cos(p), math.sin(p)],
                       [0, -math.sin(p), math.cos(p)]])
        rz = np.array([[math.cos(r), -math.sin(r), 0],
                       [math.sin(r), math.cos(r), 0],
                       [0, 0, 1]])
        return ry @ rx @ rz


def mapping_factor(y: int, s_y: int) -> float:
    """Equirectangular pole-compensation factor: 1 - sin(y*pi/S_y)."""
    return 1.0 - math.sin(y * math.pi / s_y)


def lonlat_to_dir(lon: np.ndarray, lat: np.ndarray) -> np.ndarray:
    """Unit vectors (..., 3) from longitude/latitude in radians."""
    lon, lat = np.broadcast_arrays(lon, lat)
    cl = np.cos(lat)
    return np.stack([np.sin(lon) * cl, np.sin(lat), np.cos(lon) * cl], axis=-1)


def direction_of_pixel(x, y, dims) -> np.ndarray:
    """Unit direction of pixel centre(s); dims = (N, M)."""
    n, m = dims
    lon = np.radians((np.asarray(x, dtype=np.float64) + 0.5) / n * 360.0 - 180.0)
    lat = np.radians(90.0 - (np.asarray(y, dtype=np.float64) + 0.5) / m * 180.0)
    return lonlat_to_dir(lon, lat)


def _in_frustum(dirs_cam: np.ndarray, fov_h: float, fov_v: float) -> np.ndarray:
    """Angular half-FOV test in camera space."""
    x, y, z = dirs_cam[..., 0], dirs_cam[..., 1], dirs_cam[..., 2]
    lon = np.degrees(np.arctan2(x, z))
    lat = np.degrees(np.arctan2(y, np.hypot(x, z)))
    return (np.abs(lon) <= fov_h / 2.0 + 1e-9) & (np.abs(lat) <= fov_v / 2.0 + 1e-9)


def viewport_to_mask(pose: CameraPose, dims) -> np.ndarray:
    """Binary (mask_h, mask_w) grid of cells whose centre direction lies in
    the pose's frustum, dilated by two cells for guaranteed coverage (one
    cell for the centre-test offset, one for bilinear corner sampling).

    Roll is absorbed by widening the tested FOV (exact rotated-frustum test
    once the roll angle would exceed the dilation margin).
    """
    mask_w, mask_h = dims
    xs = np.arange(mask_w)
    ys = np.arange(mask_h)
    dirs = direction_of_pixel(xs[None, :], ys[:, None], (mask_w, mask_h))

    test_pose = pose
    if abs(pose.roll) > 15:
        rot = pose.rotation().T
    else:
        rot = CameraPose(pose.yaw, pose.pitch, 0.0, pose.fov_h, pose.fov_v).rotation().T
    cam = dirs @ rot.T
    inside = _in_frustum(cam, test_pose.fov_h, test_pose.fov_v)

    from .wavelets import binary_dilate

    # dilate on a longitude-wrapped copy so the margin carries across the seam
    wrapped = np.concatenate([inside[:, -2:], inside, inside[:, :2]], axis=1)
    return binary_dilate(wrapped, 2)[:, 2:-2]


def render_perspective(region: np.ndarray, footprint: np.ndarray,
                       pose: CameraPose, out_dims) -> np.ndarray:
    """Re-project a decoded equirectangular region to a perspective image.

    ``region`` is the full-frame canvas (M, N[, C]); sampling is bilinear.
    Raises :class:`CoverageError` if any sample falls outside the footprint
    (mask/pose mismatch).
    """
    out_w, out_h = out_dims
    if not (pose.fov_h < 180 and pose.fov_v < 180):
        raise ProjectionError("perspective rendering requires FOV < 180 degrees")
    m, n = region.shape[:2]

    # camera-space rays through each output pixel centre
    u = (np.arange(out_w) + 0.5) / out_w * 2.0 - 1.0
    v = 1.0 - (np.arange(out_h) + 0.5) / out_h * 2.0
    tx = math.tan(math.radians(pose.fov_h / 2.0))
    ty = math.tan(math.radians(pose.fov_v / 2.0))
    dirs = np.empty((out_h, out_w, 3))
    dirs[..., 0] = u[None, :] * tx
    dirs[..., 1] = v[:, None] * ty
    dirs[..., 2] = 1.0
    dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)

    world = dirs @ pose.rotation().T
    lon = np.degrees(np.arctan2(world[..., 0], world[..., 2]))
    lat = np.degrees(np.arcsin(np.clip(world[..., 1], -1, 1)))

    fx = (lon + 180.0) / 360.0 * n - 0.5
    fy = (90.0 - lat) / 180.0 * m - 0.5
    x0 = np.floor(fx).astype(np.int64)
    y0 = np.floor(fy).astype(np.int64)
    wx = (fx - x0).astype(np.float32)
    wy = (fy - y0).astype(np.float32)

    x0w = np.mod(x0, n)
    x1w = np.mod(x0 + 1, n)
    y0c = np.clip(y0, 0, m - 1)
    y1c = np.clip(y0 + 1, 0, m - 1)

    corners = [(y0c, x0w), (y0c, x1w), (y1c, x0w), (y1c, x1w)]
    covered = np.ones(lon.shape, dtype=bool)
    for yy, xx in corners:
        covered &= footprint[yy, xx]
    if not covered.all():
        missing = int((~covered).sum())
        raise CoverageError(f"{missing} output pixels sample outside the footprint")

    reg = region.astype(np.float32)
    if reg.ndim == 2:
        reg = reg[..., None]
    p00 = reg[y0c, x0w]
    p01 = reg[y0c, x1w]
    p10 = reg[y1c, x0w]
    p11 = reg[y1c, x1w]
    top = p00 * (1 - wx)[..., None] + p01 * wx[..., None]
    bot = p10 * (1 - wx)[..., None] + p11 * wx[..., None]
    out = top * (1 - wy)[..., None] + bot * wy[..., None]
    out = np.clip(np.rint(out), 0, 255).astype(np.uint8)
    if region.ndim == 2:
        out = out[..., 0]
    return out


def stereo_mask(pose: CameraPose, dims) -> np.ndarray:
    """Per-eye masks for a top-bottom stereo frame, stacked vertically."""
    mask_w, mask_h = dims
    eye = viewport_to_mask(pose, (mask_w, mask_h // 2))
    return np.concatenate([eye, eye], axis=0)
