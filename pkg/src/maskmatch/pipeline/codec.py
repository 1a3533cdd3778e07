"""Seeded linear patch codec between RGB video and the latent space.

Each non-overlapping 4x4 RGB patch (48 values) is projected onto a fixed
4-dimensional orthonormal basis. The first three basis vectors span the
constant-per-channel subspace, so flat color regions survive the round
trip exactly; the fourth is a seeded spatial-detail direction. Decoding
is the transpose, i.e. orthogonal projection.
"""

import numpy as np

from ..kernels import require_finite
from ._seeding import rng_for

PATCH = 4
LATENT_DIM = 4
LATENT_SCALE = 0.25


def _basis(seed):
    cols = np.zeros((3 * PATCH * PATCH, LATENT_DIM))
    per_channel = PATCH * PATCH
    # constant-per-channel directions (mutually orthogonal by construction)
    cols[:, 0] = 1.0
    cols[0 * per_channel : 1 * per_channel, 1] = 2.0
    cols[1 * per_channel : 2 * per_channel, 1] = -1.0
    cols[2 * per_channel : 3 * per_channel, 1] = -1.0
    cols[1 * per_channel : 2 * per_channel, 2] = 1.0
    cols[2 * per_channel : 3 * per_channel, 2] = -1.0
    # seeded detail direction: diagonal ramp plus noise, replicated per channel
    rng = rng_for(seed, "codec")
    yy, xx = np.meshgrid(np.arange(PATCH), np.arange(PATCH), indexing="ij")
    ramp = (xx + yy - (PATCH - 1)).astype(np.float64).reshape(-1)
    detail = np.tile(ramp, 3) + 0.3 * rng.standard_normal(3 * per_channel)
    cols[:, 3] = detail
    q, r = np.linalg.qr(cols)
    q = q * np.sign(np.diag(r))  # fix QR sign ambiguity for determinism
    return q  # (48, 4), orthonormal columns


class PatchCodec:
    def __init__(self, seed=0):
        self.basis = _basis(seed)

    def encode(self, video):
        """(F, 3, H, W) video in [0, 1] -> (F, 4, H/4, W/4) latent."""
        video = np.asarray(video, dtype=np.float64)
        require_finite(video, "video")
        f, c, h, w = video.shape
        if c != 3:
            raise ValueError(f"expected 3 channels, got {c}")
        if h % PATCH or w % PATCH:
            raise ValueError(f"frame size {(h, w)} not divisible by patch size {PATCH}")
        hp, wp = h // PATCH, w // PATCH
        patches = (
            video.reshape(f, 3, hp, PATCH, wp, PATCH)
            .transpose(0, 2, 4, 1, 3, 5)
            .reshape(f, hp, wp, 3 * PATCH * PATCH)
        )
        z = patches @ self.basis  # (F, hp, wp, 4)
        return z.transpose(0, 3, 1, 2) * LATENT_SCALE

    def decode(self, z):
        """(F, 4, h, w) latent -> (F, 3, 4h, 4w) video."""
        z = np.asarray(z, dtype=np.float64)
        f, d, hp, wp = z.shape
        if d != LATENT_DIM:
            raise ValueError(f"expected {LATENT_DIM} latent channels, got {d}")
        flat = z.transpose(0, 2, 3, 1) / LATENT_SCALE
        patches = flat @ self.basis.T  # (F, hp, wp, 48)
        video = (
            patches.reshape(f, hp, wp, 3, PATCH, PATCH)
            .transpose(0, 3, 1, 4, 2, 5)
            .reshape(f, 3, hp * PATCH, wp * PATCH)
        )
        return video
