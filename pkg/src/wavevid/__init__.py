"""wavevid: wavelet-based viewport-dependent 360-degree video codec.

Encodes equirectangular video with a 2D CDF 9/7 transform per frame, a
temporal Haar transform across small inter-frame sets, frequency- and
latitude-aware thresholding, and 8-bit quantization into a block-addressed
``.wvv`` container that supports loading only the coefficients a viewport
(optionally gaze-foveated) actually needs.
"""
from .bench import (
    BenchReport,
    TrajectoryLog,
    circle_trajectory,
    make_synthetic_clip,
    psnr,
    replay,
    ssim,
)
from .decoding import (
    CorruptStreamError,
    DecodeError,
    DecodeSession,
    DecodeStats,
    FoveationSchedule,
)
from .encoding import (
    EncodeError,
    EncodeParams,
    MappingKind,
    default_levels,
    encode_video,
)
from .fileio import FormatError, VideoHeader, VideoReader, read_header, write_video
from .projection import (
    CameraPose,
    CoverageError,
    ProjectionError,
    render_perspective,
    viewport_to_mask,
)
from .wavelets import DimensionError, WaveletKind, analyze_2d, synthesize_2d

__version__ = "1.0.0"

__all__ = [
    "BenchReport",
    "CameraPose",
    "CorruptStreamError",
    "CoverageError",
    "DecodeError",
    "DecodeSession",
    "DecodeStats",
    "DimensionError",
    "EncodeError",
    "EncodeParams",
    "FormatError",
    "FoveationSchedule",
    "MappingKind",
    "ProjectionError",
    "TrajectoryLog",
    "VideoHeader",
    "VideoReader",
    "WaveletKind",
    "analyze_2d",
    "circle_trajectory",
    "default_levels",
    "encode_video",
    "make_synthetic_clip",
    "psnr",
    "read_header",
    "render_perspective",
    "replay",
    "ssim",
    "synthesize_2d",
    "viewport_to_mask",
    "write_video",
]
