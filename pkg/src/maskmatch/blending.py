"""Masked fusion of temporal-, cross-, and self-attention features and
latents, gated by per-attention-type step-fraction schedules.

Layout conventions:
  - unwrapped mask m: (h'*w', F), binary float
  - temp K/Q:        (h'*w', F, dim)
  - cross maps:      (F, h'*w', S')
  - self maps:       (F, h'*w', h'*w')
  - latents:         (F, d, h, w)
"""

import math
from dataclasses import dataclass

import numpy as np

from .kernels import masked_select, resize_bilinear, threshold_binarize

SELF_ATTENTION_TASKS = ("stylization", "attribute", "shape")


@dataclass
class TempAttentionState:
    """Key/query pair of a temporal attention block."""

    k: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        if self.k.shape != self.q.shape:
            raise ValueError(f"temp K/Q shapes differ: {self.k.shape} vs {self.q.shape}")


@dataclass
class BlendSchedule:
    """Fractions of the denoising run during which each blend stays active."""

    alpha_s: float = 0.99
    alpha_c: float = 0.99
    alpha_t: float = 0.99
    steps: int = 50

    def __post_init__(self):
        for name in ("alpha_s", "alpha_c", "alpha_t"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")


def blend_active(schedule: BlendSchedule, kind, step):
    """True when blending of the given kind applies at 0-based denoising step."""
    if not 0 <= step < schedule.steps:
        raise ValueError(f"step {step} outside [0, {schedule.steps})")
    alpha = {"s": schedule.alpha_s, "c": schedule.alpha_c, "t": schedule.alpha_t}[kind]
    return step < math.ceil(alpha * schedule.steps)


def unwrap(mask, target, delta):
    """Flatten a frame-resolution mask into the (h'*w', F) temporal layout.

    delta=1 zeroes the result (structure-preserving tasks keep full source
    temporal fusion). Otherwise each frame is resampled to the attention
    resolution and re-binarized at 0.5 so the selection property survives.
    """
    h, w = int(target[0]), int(target[1])
    if h < 1 or w < 1:
        raise ValueError(f"invalid unwrap target {(h, w)}")
    mask = np.asarray(mask)
    frames = mask.shape[0]
    if delta == 1:
        return np.zeros((h * w, frames), dtype=np.float64)
    out = np.empty((frames, h * w), dtype=np.float64)
    for f in range(frames):
        soft = resize_bilinear(mask[f].astype(np.float64), (h, w))
        out[f] = threshold_binarize(soft, 0.5).reshape(-1).astype(np.float64)
    return out.T.copy()


def blend_temp(src: TempAttentionState, edit: TempAttentionState, m):
    """Blend temp K/Q: source keeps the unmasked positions, edit the masked ones."""
    if src.k.shape != edit.k.shape:
        raise ValueError(f"temp state shapes differ: {src.k.shape} vs {edit.k.shape}")
    mm = np.asarray(m)[:, :, None]
    return TempAttentionState(
        k=masked_select(src.k, edit.k, mm),
        q=masked_select(src.q, edit.q, mm),
    )


def blend_cross(src_map, edit_map, m):
    """Blend cross-attention maps per spatial position, broadcast over tokens."""
    src_map = np.asarray(src_map)
    edit_map = np.asarray(edit_map)
    if src_map.shape != edit_map.shape:
        raise ValueError(f"cross map shapes differ: {src_map.shape} vs {edit_map.shape}")
    mm = np.asarray(m).T[:, :, None]  # (F, h'w', 1) over S'
    return masked_select(src_map, edit_map, mm)


def blend_self(src_map, edit_map, m, task):
    """Blend self-attention maps along the query axis.

    Attribute/shape editing replaces masked query rows with the edited map.
    Stylization inverts the roles: the object region keeps the source
    self-attention while the style change happens everywhere else, so pass
    the raw (un-zeroed) unwrap here.
    """
    if task not in SELF_ATTENTION_TASKS:
        raise ValueError(f"unknown task {task!r}")
    src_map = np.asarray(src_map)
    edit_map = np.asarray(edit_map)
    if src_map.shape != edit_map.shape:
        raise ValueError(f"self map shapes differ: {src_map.shape} vs {edit_map.shape}")
    mm = np.asarray(m).T[:, :, None]  # mask per query row
    if task == "stylization":
        return masked_select(edit_map, src_map, mm)
    return masked_select(src_map, edit_map, mm)


def blend_latent(src_z, edit_z, mask, step, cutoff):
    """Masked latent fusion for early denoising steps; identity afterwards."""
    if step < 0:
        raise ValueError("step must be >= 0")
    edit_z = np.asarray(edit_z)
    if step >= cutoff:
        return edit_z
    src_z = np.asarray(src_z)
    if src_z.shape != edit_z.shape:
        raise ValueError(f"latent shapes differ: {src_z.shape} vs {edit_z.shape}")
    mm = np.asarray(mask, dtype=np.float64)[:, None, :, :]  # broadcast over channels
    return masked_select(src_z, edit_z, mm)


def resample_mask(mask, target):
    """Re-binarized bilinear resample of a (F, H, W) mask to (F, h, w)."""
    mask = np.asarray(mask)
    out = np.empty((mask.shape[0],) + tuple(target), dtype=bool)
    for f in range(mask.shape[0]):
        soft = resize_bilinear(mask[f].astype(np.float64), target)
        out[f] = threshold_binarize(soft, 0.5)
    return out
