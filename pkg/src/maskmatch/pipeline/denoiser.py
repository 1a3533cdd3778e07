"""Seeded attention-only noise predictor standing in for a video U-Net.

Five cross-attention layers at spatial sizes (s, s/2, s/4, s/2, s) for an
s x s latent, each paired with a self-attention and a temp-attention
block. The prediction depends on the latent exclusively through attention
maps and temp keys/queries, and those are exactly the features the edit
loop can replace, so feature injection pins the prediction bit-for-bit.
Value paths are prompt-derived (cross) or fixed seeded banks (self/temp).

Everything is derived from the model seed; no weights are ever trained.
"""

import numpy as np

from ..dumpio import tokenize
from ..kernels import resize_bilinear, softmax_rows
from ._seeding import rng_for

LATENT_CHANNELS = 4
FEATURE_DIM = 12
ATTN_DIM = 8
TEXT_DIM = 12
TIME_DIM = 8

# relative contribution of the time-drift term vs the latent-dependent
# attention mix; the mix gain is kept small so the sampler's step-index
# offset between inversion and fresh sampling stays a small perturbation
TIME_GAIN = 0.5
MIX_GAIN = 0.12
LOGIT_SCALE = 3.0


class AttentionControl:
    """Hook points the denoiser calls at each attention block.

    The base class is a no-op; recording and blending subclass it.
    ``temp_kq`` runs before the temporal softmax, the two map hooks run
    right after their softmax, ``record`` runs last with final features.
    """

    def temp_kq(self, layer, k, q):
        return k, q

    def cross_map(self, layer, attn):
        return attn

    def self_map(self, layer, attn):
        return attn

    def record(self, layer, a_cross, a_self, k_temp, q_temp):
        pass


def time_embedding(step, dim=TIME_DIM):
    freqs = np.exp(np.linspace(0.0, np.log(50.0), dim // 2))
    angles = (step + 1) / freqs
    return np.concatenate([np.sin(angles), np.cos(angles)])


def token_embeddings(prompt, seed, dim=TEXT_DIM):
    """Per-token unit embeddings derived from (seed, token string)."""
    rows = []
    for tok, _ in tokenize(prompt):
        rng = rng_for(seed, "token", tok.casefold())
        v = rng.standard_normal(dim)
        rows.append(v / np.linalg.norm(v))
    return np.stack(rows)


def _ortho(rng, rows, cols):
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    return q if rows >= cols else q.T


def resize_video(arr, target):
    """Bilinear per-frame, per-channel resize of (F, C, h, w) to target."""
    f, c = arr.shape[:2]
    out = np.empty((f, c) + tuple(target), dtype=np.float64)
    for i in range(f):
        for j in range(c):
            out[i, j] = resize_bilinear(arr[i, j], target)
    return out


class ToyDenoiser:
    """Deterministic noise predictor; same inputs give bit-identical outputs."""

    def __init__(self, seed=0, latent_size=16):
        if latent_size % 4:
            raise ValueError("latent size must be divisible by 4")
        self.seed = seed
        self.latent_size = latent_size
        self.layer_sizes = (
            latent_size,
            latent_size // 2,
            latent_size // 4,
            latent_size // 2,
            latent_size,
        )
        self.layers = []
        for l, s in enumerate(self.layer_sizes):
            rng = rng_for(seed, "layer", l)
            self.layers.append(
                {
                    "size": s,
                    "w_in": _ortho(rng, LATENT_CHANNELS, FEATURE_DIM),
                    "w_time": _ortho(rng, TIME_DIM, FEATURE_DIM) * 0.5,
                    "wq_c": _ortho(rng, FEATURE_DIM, ATTN_DIM),
                    "wk_c": _ortho(rng, TEXT_DIM, ATTN_DIM),
                    "wv_c": _ortho(rng, TEXT_DIM, FEATURE_DIM),
                    "wq_s": _ortho(rng, FEATURE_DIM, ATTN_DIM),
                    "wk_s": _ortho(rng, FEATURE_DIM, ATTN_DIM),
                    "v_self": rng.standard_normal((s * s, FEATURE_DIM)) / np.sqrt(s * s),
                    "wq_t": _ortho(rng, FEATURE_DIM, ATTN_DIM),
                    "wk_t": _ortho(rng, FEATURE_DIM, ATTN_DIM),
                    "w_out": _ortho(rng, FEATURE_DIM, LATENT_CHANNELS),
                }
            )
        drift_rng = rng_for(seed, "drift")
        self._drift_proj = drift_rng.standard_normal((TIME_DIM, LATENT_CHANNELS)) / np.sqrt(
            TIME_DIM
        )
        self._drift_pattern = drift_rng.standard_normal(
            (LATENT_CHANNELS, latent_size, latent_size)
        )
        self._temp_banks = {}

    @property
    def num_layers(self):
        return len(self.layers)

    def _temp_bank(self, layer, frames):
        key = (layer, frames)
        if key not in self._temp_banks:
            rng = rng_for(self.seed, "temp-values", layer)
            self._temp_banks[key] = rng.standard_normal((frames, FEATURE_DIM)) / np.sqrt(
                frames
            )
        return self._temp_banks[key]

    def forward(self, z, text_emb, step, control: AttentionControl | None = None):
        """Predict noise for latent ``z`` (F, 4, s, s) at integer step key."""
        f, d, h, w = z.shape
        if (h, w) != (self.latent_size, self.latent_size):
            raise ValueError(f"latent size {(h, w)} does not match model {self.latent_size}")
        temb = time_embedding(step)
        mix = np.zeros_like(z)
        for l, p in enumerate(self.layers):
            s = p["size"]
            x = resize_video(z, (s, s)) if s != h else z
            feats = x.transpose(0, 2, 3, 1).reshape(f, s * s, d)
            hid = np.tanh(feats @ p["w_in"] + temb @ p["w_time"])

            # cross-attention: queries from the latent, keys/values from text
            k_txt = text_emb @ p["wk_c"]
            v_txt = text_emb @ p["wv_c"]
            logits = (hid @ p["wq_c"]) @ k_txt.T * (LOGIT_SCALE / np.sqrt(ATTN_DIM))
            a_cross = softmax_rows(logits, axis=-1)
            if control is not None:
                a_cross = control.cross_map(l, a_cross)
            out_cross = a_cross @ v_txt

            # self-attention over spatial positions, values from a fixed bank
            qs = hid @ p["wq_s"]
            ks = hid @ p["wk_s"]
            a_self = softmax_rows(
                qs @ ks.transpose(0, 2, 1) / np.sqrt(ATTN_DIM), axis=-1
            )
            if control is not None:
                a_self = control.self_map(l, a_self)
            out_self = a_self @ p["v_self"]

            # temp-attention across frames at each spatial position
            hid_t = hid.transpose(1, 0, 2)  # (s*s, F, C)
            q_t = hid_t @ p["wq_t"]
            k_t = hid_t @ p["wk_t"]
            if control is not None:
                k_t, q_t = control.temp_kq(l, k_t, q_t)
            a_temp = softmax_rows(q_t @ k_t.transpose(0, 2, 1) / np.sqrt(ATTN_DIM), axis=-1)
            out_temp = (a_temp @ self._temp_bank(l, f)).transpose(1, 0, 2)

            if control is not None:
                control.record(l, a_cross=a_cross, a_self=a_self, k_temp=k_t, q_temp=q_t)

            y = ((out_cross + out_self + out_temp) / 3.0) @ p["w_out"]
            y_map = y.reshape(f, s, s, d).transpose(0, 3, 1, 2)
            mix += resize_video(y_map, (h, w)) if s != h else y_map

        drift = (temb @ self._drift_proj)[None, :, None, None] * self._drift_pattern[None]
        return TIME_GAIN * drift + MIX_GAIN * (mix / self.num_layers)
