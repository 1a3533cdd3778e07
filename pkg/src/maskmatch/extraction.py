"""Turn cross-attention dumps into the per-(timestep, layer) candidate mask family.

Candidate pipeline: slice out the object word's token columns (averaging
sub-tokens), min-max normalise per frame, resize the soft map to the video
resolution, then binarize at tau. Normalisation before thresholding is the
default but switchable, since raw-value thresholding is a defensible
alternative reading.
"""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from . import dumpio
from .kernels import minmax_normalize, resize_bilinear, threshold_binarize


@dataclass
class CrossAttentionMap:
    """One layer/timestep attention tensor of shape (F, h'*w', S')."""

    tensor: np.ndarray
    layer: int
    timestep: int
    spatial: tuple  # (h', w')

    def __post_init__(self):
        h, w = self.spatial
        f, s, _ = self.tensor.shape
        if s != h * w:
            raise ValueError(f"spatial {self.spatial} inconsistent with map rows {s}")

    def validate_row_sums(self, tol=1e-2):
        worst = float(np.abs(self.tensor.sum(axis=-1) - 1.0).max())
        if worst > tol:
            raise ValueError(f"attention rows sum to 1 +- {worst:.3g}, tolerance {tol}")


@dataclass
class MaskCandidate:
    grid: np.ndarray  # bool (F, H, W)
    layer: int
    timestep: int


@dataclass
class MaskSet:
    """Complete candidate grid: one mask for every (timestep, layer) pair."""

    candidates: dict  # (t, l) -> MaskCandidate
    steps: int
    layers: int
    resolution: tuple
    frames: int = 0

    def get(self, t, l):
        return self.candidates[(t, l)]


def extract_token_map(attn: CrossAttentionMap, align: dumpio.TokenAlignment):
    """Average the aligned token columns and reshape to (F, h', w')."""
    f, s, sp = attn.tensor.shape
    for i in align.token_indices:
        if i >= sp:
            raise ValueError(f"token index {i} out of range for S'={sp}")
    cols = attn.tensor[:, :, align.token_indices]
    h, w = attn.spatial
    return cols.mean(axis=-1).reshape(f, h, w)


def candidate_from_map(
    attn: CrossAttentionMap,
    align: dumpio.TokenAlignment,
    tau: float,
    resolution,
    normalize_before_threshold=True,
):
    """Build one binary mask candidate at the video resolution."""
    token_map = extract_token_map(attn, align)
    frames = []
    for fm in token_map:
        soft = minmax_normalize(fm) if normalize_before_threshold else fm
        frames.append(resize_bilinear(soft, resolution))
    soft_full = np.stack(frames)
    grid = threshold_binarize(soft_full, tau)
    return MaskCandidate(grid=grid, layer=attn.layer, timestep=attn.timestep)


def build_mask_set(
    manifest_path,
    align: dumpio.TokenAlignment,
    tau: float,
    resolution,
    normalize_before_threshold=True,
):
    """Read every dump in the manifest and produce the full T x L candidate set."""
    manifest_path = Path(manifest_path)
    entries = dumpio.read_manifest(manifest_path)
    if not entries:
        raise ValueError(f"empty manifest {manifest_path}")
    base = manifest_path.parent

    by_key = {}
    for e in entries:
        by_key[(e.timestep_index, e.layer_index)] = e
    steps = 1 + max(t for t, _ in by_key)
    layers = 1 + max(l for _, l in by_key)
    missing = [(t, l) for t in range(steps) for l in range(layers) if (t, l) not in by_key]
    if missing:
        raise ValueError(f"manifest incomplete, missing (t, l) pairs: {missing}")

    candidates = {}
    frames = 0
    for (t, l), e in by_key.items():
        tensor = dumpio.read_dump(base / e.file)
        attn = CrossAttentionMap(tensor=tensor, layer=l, timestep=t, spatial=tuple(e.spatial))
        candidates[(t, l)] = candidate_from_map(
            attn, align, tau, resolution, normalize_before_threshold
        )
        frames = e.frames
    return MaskSet(
        candidates=candidates,
        steps=steps,
        layers=layers,
        resolution=tuple(resolution),
        frames=frames,
    )


def dump_candidate_pngs(mask_set: MaskSet, out_dir):
    """Debug output: one white-on-black PNG per candidate frame."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for (t, l), cand in sorted(mask_set.candidates.items()):
        for f in range(cand.grid.shape[0]):
            img = Image.fromarray((cand.grid[f] * np.uint8(255)))
            img.save(out_dir / f"t{t}_l{l}_f{f}.png")
