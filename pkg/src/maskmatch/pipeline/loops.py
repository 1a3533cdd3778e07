"""Inversion, reconstruction, and the full mask-guided editing loop.

The source branch of an edit never re-runs the network: inversion caches
every attention feature and noise prediction, sampling replays or blends
against the cache. Cache keys are the inversion step indices k in
[0, steps); the sampling pass walks them in reverse and evaluates the
network with the same step embedding, which keeps inversion/sampling an
exact algebraic inverse pair when predictions match.
"""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import dumpio
from ..blending import (
    BlendSchedule,
    TempAttentionState,
    blend_active,
    blend_cross,
    blend_latent,
    blend_self,
    blend_temp,
    resample_mask,
    unwrap,
)
from ..extraction import build_mask_set
from ..mmc import MMCProfile, matching_matrix, select_masks, semantic_delta
from .codec import PatchCodec
from .denoiser import AttentionControl, ToyDenoiser, token_embeddings
from .schedule import Schedule, cfg, ddim_invert_step, ddim_step, linear_schedule

TASKS = ("stylization", "attribute", "shape")


@dataclass
class EditConfig:
    steps: int = 50
    tau: float = 0.3
    guidance: float = 7.5
    alpha_s: float = 0.99
    alpha_c: float = 0.99
    alpha_t: float = 0.99
    seed: int = 0
    task: str = "attribute"
    latent_cutoff: int = 0  # masked latent fusion of the first N steps; 0 = off
    normalize_before_threshold: bool = True

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError(f"tau={self.tau} outside [0, 1]")

    def blend_schedule(self):
        return BlendSchedule(
            alpha_s=self.alpha_s,
            alpha_c=self.alpha_c,
            alpha_t=self.alpha_t,
            steps=self.steps,
        )


@dataclass
class FeatureCache:
    """Everything the source branch produced during inversion."""

    steps: int
    layers: int
    cross: dict = field(default_factory=dict)  # (k, l) -> (F, s*s, S') f32
    self_maps: dict = field(default_factory=dict)  # (k, l) -> (F, s*s, s*s) f32
    temp_k: dict = field(default_factory=dict)  # (k, l) -> (s*s, F, dim) f32
    temp_q: dict = field(default_factory=dict)
    eps: dict = field(default_factory=dict)  # k -> (F, d, h, w) f64
    z: dict = field(default_factory=dict)  # k -> latent entering step k; z[steps] = z_T

    def is_complete(self):
        keys = [(k, l) for k in range(self.steps) for l in range(self.layers)]
        return all(
            key in store
            for store in (self.cross, self.self_maps, self.temp_k, self.temp_q)
            for key in keys
        ) and all(k in self.eps for k in range(self.steps))


class FeatureRecorder(AttentionControl):
    def __init__(self, cache: FeatureCache, key: int):
        self.cache = cache
        self.key = key

    def record(self, layer, a_cross, a_self, k_temp, q_temp):
        k = (self.key, layer)
        self.cache.cross[k] = a_cross.astype(np.float32)
        self.cache.self_maps[k] = a_self.astype(np.float32)
        self.cache.temp_k[k] = k_temp.astype(np.float32)
        self.cache.temp_q[k] = q_temp.astype(np.float32)


class FeatureBlender(AttentionControl):
    """Blends the edit branch's attention features against the cache.

    ``preserved_tokens`` lists token columns whose words survive the prompt
    swap; after the masked pre-blend those columns are taken wholesale from
    the source map (the usual downstream fusion).
    """

    def __init__(
        self,
        cache: FeatureCache,
        key: int,
        mask,
        delta: int,
        task: str,
        active: dict,
        preserved_tokens=(),
    ):
        self.cache = cache
        self.key = key
        self.mask = mask  # (F, H, W) bool, selected for this step
        self.delta = delta
        self.task = task
        self.active = active
        self.preserved_tokens = tuple(preserved_tokens)
        self._unwraps = {}

    def _unwrap(self, positions, zeroed):
        side = int(round(positions**0.5))
        key = (side, zeroed)
        if key not in self._unwraps:
            self._unwraps[key] = unwrap(self.mask, (side, side), 1 if zeroed else 0)
        return self._unwraps[key]

    def temp_kq(self, layer, k, q):
        if not self.active["t"]:
            return k, q
        src = TempAttentionState(
            k=self.cache.temp_k[(self.key, layer)].astype(np.float64),
            q=self.cache.temp_q[(self.key, layer)].astype(np.float64),
        )
        m = self._unwrap(k.shape[0], zeroed=self.delta == 1)
        blended = blend_temp(src, TempAttentionState(k=k, q=q), m)
        return blended.k, blended.q

    def cross_map(self, layer, attn):
        if not self.active["c"]:
            return attn
        src = self.cache.cross[(self.key, layer)].astype(np.float64)
        if src.shape != attn.shape:
            raise ValueError(
                "cached and edited cross maps differ in shape; "
                "edit prompts must be token-aligned with the source"
            )
        m = self._unwrap(attn.shape[1], zeroed=self.delta == 1)
        blended = blend_cross(src, attn, m)
        for j in self.preserved_tokens:
            blended[:, :, j] = src[:, :, j]
        return blended

    def self_map(self, layer, attn):
        if not self.active["s"]:
            return attn
        src = self.cache.self_maps[(self.key, layer)].astype(np.float64)
        zeroed = self.delta == 1 and self.task != "stylization"
        m = self._unwrap(attn.shape[1], zeroed=zeroed)
        return blend_self(src, attn, m, self.task)


def invert(z0, prompt, denoiser: ToyDenoiser, schedule: Schedule, dump_dir=None, model_id="toy"):
    """Run DDIM inversion, caching features and optionally writing dumps.

    Returns (z_T, cache, manifest_path or None). Inversion runs the
    conditional prediction only (guidance-scale-1 convention).
    """
    cache = FeatureCache(steps=schedule.steps, layers=denoiser.num_layers)
    text = token_embeddings(prompt, denoiser.seed)
    z = np.asarray(z0, dtype=np.float64)
    for k in range(schedule.steps):
        cache.z[k] = z
        recorder = FeatureRecorder(cache, key=k)
        eps = denoiser.forward(z, text, k, control=recorder)
        cache.eps[k] = eps
        z = ddim_invert_step(z, eps, k, schedule)
    cache.z[schedule.steps] = z

    manifest_path = None
    if dump_dir is not None:
        manifest_path = write_attention_dumps(cache, denoiser, prompt, dump_dir, model_id)
    return z, cache, manifest_path


def write_attention_dumps(cache: FeatureCache, denoiser: ToyDenoiser, prompt, dump_dir, model_id):
    dump_dir = Path(dump_dir)
    dump_dir.mkdir(parents=True, exist_ok=True)
    tokens = [t for t, _ in dumpio.tokenize(prompt)]
    entries = []
    for (k, l), tensor in sorted(cache.cross.items()):
        s = denoiser.layer_sizes[l]
        frames = tensor.shape[0]
        entry = dumpio.DumpEntry(
            model_id=model_id,
            layer_index=l,
            timestep_index=k,
            spatial=(s, s),
            frames=frames,
            token_count=tensor.shape[2],
            token_strings=tokens,
            file=f"t{k:03d}_l{l}.attn",
        )
        dumpio.write_dump(tensor, entry, dump_dir)
        entries.append(entry)
    manifest_path = dump_dir / "manifest.json"
    dumpio.write_manifest(entries, manifest_path)
    return manifest_path


def replay(z_t, cache: FeatureCache, schedule: Schedule):
    """Denoise using the cached predictions; exact inverse of inversion."""
    z = np.asarray(z_t, dtype=np.float64)
    for k in range(schedule.steps - 1, -1, -1):
        z = ddim_step(z, cache.eps[k], k + 1, schedule)
    return z


def sample(z_t, prompt, denoiser: ToyDenoiser, schedule: Schedule, guidance=1.0, control_for=None):
    """Denoise with fresh predictions under ``prompt``.

    ``control_for`` maps a cache key k to an AttentionControl for the
    conditional pass (used by the edit loop); the unconditional pass always
    runs clean because the cache holds no unconditional features.
    """
    text = token_embeddings(prompt, denoiser.seed)
    uncond = token_embeddings("", denoiser.seed) if guidance != 1.0 else None
    z = np.asarray(z_t, dtype=np.float64)
    for k in range(schedule.steps - 1, -1, -1):
        control = control_for(k) if control_for is not None else None
        eps_cond = denoiser.forward(z, text, k, control=control)
        if uncond is None:
            eps = eps_cond
        else:
            eps_uncond = denoiser.forward(z, uncond, k)
            eps = cfg(eps_cond, eps_uncond, guidance)
        z = ddim_step(z, eps, k + 1, schedule)
    return z


def reconstruct(video, prompt, config: EditConfig):
    """Invert then freshly denoise under the source prompt (no blending)."""
    codec = PatchCodec(config.seed)
    z0 = codec.encode(video)
    denoiser = ToyDenoiser(config.seed, latent_size=z0.shape[-1])
    schedule = linear_schedule(config.steps)
    z_t, _, _ = invert(z0, prompt, denoiser, schedule)
    z_rec = sample(z_t, prompt, denoiser, schedule, guidance=1.0)
    return codec.decode(z_rec), z0, z_rec


def profile_video(video, reference_masks, prompt, word, config: EditConfig, dump_dir, model_id="toy"):
    """Invert one video and score its candidate masks against the reference.

    Returns the (steps, layers) IoU matrix feeding profile aggregation.
    """
    codec = PatchCodec(config.seed)
    z0 = codec.encode(video)
    denoiser = ToyDenoiser(config.seed, latent_size=z0.shape[-1])
    schedule = linear_schedule(config.steps)
    _, _, manifest_path = invert(
        z0, prompt, denoiser, schedule, dump_dir=dump_dir, model_id=model_id
    )
    align = dumpio.align_token(prompt, word, dumpio.tokenize(prompt))
    mask_set = build_mask_set(
        manifest_path,
        align,
        config.tau,
        video.shape[-2:],
        normalize_before_threshold=config.normalize_before_threshold,
    )
    return matching_matrix(mask_set, reference_masks)


def _preserved_token_columns(prompt0, prompt1):
    t0 = [t.casefold() for t, _ in dumpio.tokenize(prompt0)]
    t1 = [t.casefold() for t, _ in dumpio.tokenize(prompt1)]
    if len(t0) != len(t1):
        raise ValueError(
            f"edit prompts must be token-aligned: {len(t0)} vs {len(t1)} tokens"
        )
    return [j for j, (a, b) in enumerate(zip(t0, t1)) if a == b]


@dataclass
class EditResult:
    video: np.ndarray
    delta: int
    mode: str
    mask_set_size: int
    manifest_path: Path
    profile: MMCProfile


def edit(video, prompt0, prompt1, word0, word1, config: EditConfig, profile: MMCProfile, workdir):
    """Full mask-guided edit: invert under the source prompt, select masks
    via the profile, then denoise the edit branch with masked feature
    blending against the cached source features."""
    if profile.steps != config.steps:
        raise ValueError(
            f"profile was computed for {profile.steps} steps, edit configured for {config.steps}"
        )
    workdir = Path(workdir)
    codec = PatchCodec(config.seed)
    z0 = codec.encode(video)
    denoiser = ToyDenoiser(config.seed, latent_size=z0.shape[-1])
    if profile.layers != denoiser.num_layers:
        raise ValueError(
            f"profile has {profile.layers} layers, model has {denoiser.num_layers}"
        )
    schedule = linear_schedule(config.steps)

    z_t, cache, manifest_path = invert(
        z0, prompt0, denoiser, schedule, dump_dir=workdir / "dumps", model_id=f"toy-{config.seed}"
    )

    align = dumpio.align_token(prompt0, word0, dumpio.tokenize(prompt0))
    resolution = video.shape[-2:]
    mask_set = build_mask_set(
        manifest_path,
        align,
        config.tau,
        resolution,
        normalize_before_threshold=config.normalize_before_threshold,
    )
    delta = semantic_delta(word0, word1)
    selected = select_masks(mask_set, profile, delta)
    preserved = _preserved_token_columns(prompt0, prompt1)

    blend_sched = config.blend_schedule()
    latent_masks = {}

    def control_for(k):
        step_index = schedule.steps - 1 - k  # 0-based denoising step from the start
        active = {kind: blend_active(blend_sched, kind, step_index) for kind in "sct"}
        return FeatureBlender(
            cache,
            key=k,
            mask=selected.at(k),
            delta=delta,
            task=config.task,
            active=active,
            preserved_tokens=preserved,
        )

    text = token_embeddings(prompt1, denoiser.seed)
    uncond = token_embeddings("", denoiser.seed) if config.guidance != 1.0 else None
    z = z_t
    for k in range(schedule.steps - 1, -1, -1):
        step_index = schedule.steps - 1 - k
        eps_cond = denoiser.forward(z, text, k, control=control_for(k))
        if uncond is None:
            eps = eps_cond
        else:
            eps_uncond = denoiser.forward(z, uncond, k)
            eps = cfg(eps_cond, eps_uncond, config.guidance)
        z = ddim_step(z, eps, k + 1, schedule)
        if config.latent_cutoff > 0 and step_index < config.latent_cutoff:
            if k not in latent_masks:
                latent_masks[k] = resample_mask(selected.at(k), z.shape[-2:])
            z = blend_latent(cache.z[k], z, latent_masks[k], step_index, config.latent_cutoff)

    return EditResult(
        video=codec.decode(z),
        delta=delta,
        mode=selected.mode,
        mask_set_size=len(mask_set.candidates),
        manifest_path=manifest_path,
        profile=profile,
    )
