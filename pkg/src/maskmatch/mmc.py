"""Mask matching cost: MIoU against reference masks, per-layer and
per-timestep reciprocal-IoU cost curves, argmin selection, and the
semantic-adaptive choice between time-aware and time-agnostic masks.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .extraction import MaskSet
from .kernels import miou_counts

# Guards the reciprocal when a candidate never intersects the reference.
EPSILON = 1e-6


def miou(a, b):
    """Intersection over union of two binary grids of identical dims.

    Two empty masks agree that nothing is the object, so IoU is defined
    as 1 rather than 0/0.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"mask dims differ: {a.shape} vs {b.shape}")
    inter, union = miou_counts(a, b)
    if union == 0:
        return 1.0
    return inter / union


def lmmc(d):
    """Per-layer cost: mean over timesteps of 1/IoU (epsilon-guarded)."""
    d = np.asarray(d, dtype=np.float64)
    if d.size == 0:
        raise ValueError("empty cost matrix")
    return (1.0 / np.maximum(d, EPSILON)).mean(axis=0)


def tmmc(d):
    """Per-timestep cost: mean over layers of 1/IoU. Equals lmmc(d.T)."""
    d = np.asarray(d, dtype=np.float64)
    if d.size == 0:
        raise ValueError("empty cost matrix")
    return (1.0 / np.maximum(d, EPSILON)).mean(axis=1)


def select_layer(layer_costs):
    costs = np.asarray(layer_costs)
    if costs.size == 0:
        raise ValueError("empty cost vector")
    return int(np.argmin(costs))  # argmin takes the smallest index on ties


def select_timestep(timestep_costs):
    costs = np.asarray(timestep_costs)
    if costs.size == 0:
        raise ValueError("empty cost vector")
    return int(np.argmin(costs))


@dataclass
class MMCProfile:
    """Aggregated matching profile for one model."""

    model_id: str
    d: np.ndarray  # (T, L) mean IoU values
    layer_costs: np.ndarray
    timestep_costs: np.ndarray
    l_star: int
    t_star: int
    video_count: int

    @property
    def steps(self):
        return self.d.shape[0]

    @property
    def layers(self):
        return self.d.shape[1]

    def to_json(self):
        return {
            "model_id": self.model_id,
            "T": self.steps,
            "L": self.layers,
            "d": self.d.tolist(),
            "D_l": self.layer_costs.tolist(),
            "D_t": self.timestep_costs.tolist(),
            "l_star": self.l_star,
            "t_star": self.t_star,
            "video_count": self.video_count,
        }

    @classmethod
    def from_json(cls, obj):
        d = np.asarray(obj["d"], dtype=np.float64)
        return cls(
            model_id=obj["model_id"],
            d=d,
            layer_costs=np.asarray(obj["D_l"], dtype=np.float64),
            timestep_costs=np.asarray(obj["D_t"], dtype=np.float64),
            l_star=int(obj["l_star"]),
            t_star=int(obj["t_star"]),
            video_count=int(obj["video_count"]),
        )

    def save(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_json(), f, indent=1)
            f.write("\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as f:
            return cls.from_json(json.load(f))


def profile_from_matrix(d, model_id="", video_count=1):
    d = np.asarray(d, dtype=np.float64)
    layer_costs = lmmc(d)
    timestep_costs = tmmc(d)
    return MMCProfile(
        model_id=model_id,
        d=d,
        layer_costs=layer_costs,
        timestep_costs=timestep_costs,
        l_star=select_layer(layer_costs),
        t_star=select_timestep(timestep_costs),
        video_count=video_count,
    )


def matching_matrix(mask_set: MaskSet, reference):
    """Per-video IoU matrix: d[t, l] = miou(candidate(t, l), reference)."""
    d = np.empty((mask_set.steps, mask_set.layers), dtype=np.float64)
    for (t, l), cand in mask_set.candidates.items():
        d[t, l] = miou(cand.grid, reference)
    return d


def aggregate_profiles(per_video, model_id="", aggregate="mean_iou"):
    """Reduce per-video d matrices to one profile.

    ``mean_iou`` (default) averages IoU cellwise before taking reciprocals;
    ``mean_cost`` averages the per-video cost curves instead. Selection is
    on the aggregated curves either way.
    """
    mats = [np.asarray(m, dtype=np.float64) for m in per_video]
    if not mats:
        raise ValueError("no videos to aggregate")
    shape = mats[0].shape
    for m in mats[1:]:
        if m.shape != shape:
            raise ValueError(f"video matrix shapes differ: {m.shape} vs {shape}")
    mean_d = np.mean(mats, axis=0)
    if aggregate == "mean_iou":
        layer_costs = lmmc(mean_d)
        timestep_costs = tmmc(mean_d)
    elif aggregate == "mean_cost":
        layer_costs = np.mean([lmmc(m) for m in mats], axis=0)
        timestep_costs = np.mean([tmmc(m) for m in mats], axis=0)
    else:
        raise ValueError(f"unknown aggregate mode {aggregate!r}")
    return MMCProfile(
        model_id=model_id,
        d=mean_d,
        layer_costs=layer_costs,
        timestep_costs=timestep_costs,
        l_star=select_layer(layer_costs),
        t_star=select_timestep(timestep_costs),
        video_count=len(mats),
    )


def semantic_delta(word0, word1):
    """1 when the source and edit object words coincide (case-folded), else 0."""
    a = word0.strip().casefold()
    b = word1.strip().casefold()
    if not a or not b:
        raise ValueError("object words must be nonempty")
    return 1 if a == b else 0


@dataclass
class SelectedMasks:
    """Per-timestep masks chosen from the candidate set.

    ``time-aware`` keeps each timestep's own mask at the best layer;
    ``time-agnostic`` reuses the single best (t*, l*) mask everywhere.
    """

    masks: list = field(default_factory=list)  # index t -> bool (F, H, W)
    mode: str = "time-aware"
    l_star: int = 0
    t_star: int = 0

    def at(self, t):
        return self.masks[t]


def select_masks(mask_set: MaskSet, profile: MMCProfile, delta):
    if not 0 <= profile.l_star < mask_set.layers:
        raise ValueError(f"profile l*={profile.l_star} outside layer range {mask_set.layers}")
    if not 0 <= profile.t_star < mask_set.steps:
        raise ValueError(f"profile t*={profile.t_star} outside step range {mask_set.steps}")
    if delta == 1:
        fixed = mask_set.get(profile.t_star, profile.l_star).grid
        masks = [fixed.copy() for _ in range(mask_set.steps)]
        mode = "time-agnostic"
    else:
        masks = [mask_set.get(t, profile.l_star).grid for t in range(mask_set.steps)]
        mode = "time-aware"
    return SelectedMasks(masks=masks, mode=mode, l_star=profile.l_star, t_star=profile.t_star)
