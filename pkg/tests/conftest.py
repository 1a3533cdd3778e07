import numpy as np
import pytest

from maskmatch.pipeline.codec import PatchCodec
from maskmatch.pipeline.denoiser import ToyDenoiser
from maskmatch.pipeline.loops import invert
from maskmatch.pipeline.schedule import linear_schedule
from maskmatch.pipeline.synthetic import moving_square


@pytest.fixture(scope="session")
def scene64():
    video, masks, color = moving_square(frames=4, size=64, seed=0)
    return video, masks, color


@pytest.fixture(scope="session")
def inversion10(scene64, tmp_path_factory):
    """Shared T=10 inversion with dumps, for the cheaper integration tests."""
    video, _, color = scene64
    prompt = f"a {color} square moving"
    codec = PatchCodec(0)
    z0 = codec.encode(video)
    denoiser = ToyDenoiser(0, latent_size=z0.shape[-1])
    schedule = linear_schedule(10)
    dump_dir = tmp_path_factory.mktemp("dumps10")
    z_t, cache, manifest = invert(z0, prompt, denoiser, schedule, dump_dir=dump_dir)
    return {
        "video": video,
        "prompt": prompt,
        "codec": codec,
        "z0": z0,
        "z_t": z_t,
        "cache": cache,
        "manifest": manifest,
        "denoiser": denoiser,
        "schedule": schedule,
    }
