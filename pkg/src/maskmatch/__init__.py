"""Attention-mask precision profiling and mask-guided feature blending.

The package quantifies how well binary masks thresholded from diffusion
cross-attention maps match reference segmentations, selects the best
layer/timestep per editing task, and applies the selected masks when
fusing temporal-, cross-, and self-attention features (and optionally
latents) inside a deterministic inversion-then-denoising loop.
"""

__version__ = "0.1.0"

from . import blending, dumpio, evaluation, extraction, kernels, mmc, pipeline

__all__ = [
    "blending",
    "dumpio",
    "evaluation",
    "extraction",
    "kernels",
    "mmc",
    "pipeline",
    "__version__",
]
