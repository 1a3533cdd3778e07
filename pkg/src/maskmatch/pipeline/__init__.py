"""Deterministic miniature latent-video diffusion stack: patch codec,
seeded attention denoiser, DDIM inversion/sampling, feature caching, and
the mask-guided edit loop."""

from .codec import PatchCodec
from .denoiser import AttentionControl, ToyDenoiser, token_embeddings
from .frames import load_video, save_video
from .loops import (
    EditConfig,
    EditResult,
    FeatureBlender,
    FeatureCache,
    FeatureRecorder,
    edit,
    invert,
    reconstruct,
    replay,
    sample,
    write_attention_dumps,
)
from .schedule import Schedule, cfg, ddim_invert_step, ddim_step, linear_schedule
from .synthetic import moving_square, write_fixture_dataset

__all__ = [
    "AttentionControl",
    "EditConfig",
    "EditResult",
    "FeatureBlender",
    "FeatureCache",
    "FeatureRecorder",
    "PatchCodec",
    "Schedule",
    "ToyDenoiser",
    "cfg",
    "ddim_invert_step",
    "ddim_step",
    "edit",
    "invert",
    "linear_schedule",
    "load_video",
    "moving_square",
    "reconstruct",
    "replay",
    "sample",
    "save_video",
    "token_embeddings",
    "write_attention_dumps",
    "write_fixture_dataset",
]
