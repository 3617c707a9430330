import numpy as np
import pytest

from wavevid.bench import make_synthetic_clip
from wavevid.encoding import EncodeParams, MappingKind, encode_video
from wavevid.fileio import write_video


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def smooth_clip():
    """Small drifting-gradient clip: 8 frames of 128x128 RGB."""
    return make_synthetic_clip(frames=8, size=128)


@pytest.fixture(scope="session")
def noise_clip():
    """Adversarial content: every subband carries energy everywhere."""
    return np.random.default_rng(3).integers(
        0, 256, (4, 256, 256, 3), dtype=np.uint8
    )


def encode_to(path, clip, **overrides):
    """Encode a clip to ``path`` with mapping NONE unless overridden."""
    params = EncodeParams(**{"mapping": MappingKind.NONE, **overrides})
    write_video(encode_video(clip, params), path)
    return path


@pytest.fixture(scope="session")
def lossless_file(tmp_path_factory, smooth_clip):
    path = tmp_path_factory.mktemp("files") / "lossless.wvv"
    return encode_to(path, smooth_clip, alpha=0.0, inter_threshold=0.0,
                     quantize=False, levels=3)


@pytest.fixture(scope="session")
def quantized_file(tmp_path_factory, smooth_clip):
    path = tmp_path_factory.mktemp("files") / "hq.wvv"
    return encode_to(path, smooth_clip, alpha=0.1, inter_threshold=0.005, levels=3)
