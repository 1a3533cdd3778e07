"""Deterministic stand-in for a hookable text-to-video diffusion pipeline.

Shaped like the real integrations this tool targets: a module tree with
named submodules, a tokenizer, and an inversion driver that runs every
attention site once per timestep. One site exposes ready attention
probabilities, the other only Q/K projections, covering both capture
paths. Everything is seeded, so captures are reproducible.
"""

import hashlib

import numpy as np


def _rng(*parts):
    tag = "\x1f".join(str(p) for p in parts).encode()
    seed = int.from_bytes(hashlib.blake2b(tag, digest_size=8).digest(), "little")
    return np.random.default_rng(seed)


def _softmax(logits):
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


class _StubBlock:
    """Non-attention module; present so discovery has something to skip."""


class _StubCrossAttention:
    is_cross_attention = True

    def __init__(self, name, spatial, heads=2, head_dim=8, expose="probs"):
        self.name = name
        self.spatial = spatial  # (h', w')
        self.heads = heads
        self.head_dim = head_dim
        self.expose = expose
        self.attn_hook = None

    def __call__(self, seed, frames, tokens, t):
        if self.attn_hook is None:
            return
        s = self.spatial[0] * self.spatial[1]
        rng = _rng(seed, self.name, t)
        if self.expose == "probs":
            logits = 2.0 * rng.standard_normal((self.heads, frames, s, len(tokens)))
            self.attn_hook({"attn_probs": _softmax(logits)})
        else:
            q = rng.standard_normal((self.heads, frames, s, self.head_dim))
            k = rng.standard_normal((self.heads, frames, len(tokens), self.head_dim))
            self.attn_hook({"query": q, "key": k, "scale": 1.0 / np.sqrt(self.head_dim)})


class StubHost:
    """Fake pipeline with two cross-attention sites at different resolutions."""

    def __init__(self, model_id="stub", seed=0):
        self.model_id = model_id
        self.seed = seed
        self._tree = [
            ("encoder", _StubBlock()),
            ("down.block0", _StubBlock()),
            ("down.block0.cross_attn", _StubCrossAttention("down0", (8, 8), expose="probs")),
            ("mid.resnet", _StubBlock()),
            ("mid.cross_attn", _StubCrossAttention("mid", (4, 4), expose="qk")),
        ]

    def named_modules(self):
        yield from self._tree

    def tokenize(self, prompt):
        return ["<bos>"] + prompt.split()

    def run_inversion(self, frames, prompt, steps, step_callback=None):
        """Drive the fake denoiser through ``steps`` inversion steps.

        ``frames`` is the frame count of the clip being inverted; attention
        modules fire their hooks once per step in forward order.
        """
        tokens = self.tokenize(prompt)
        for t in range(steps):
            for _, module in self._tree:
                if getattr(module, "is_cross_attention", False):
                    module(self.seed, frames, tokens, t)
            if step_callback is not None:
                step_callback(t)


HOSTS = {"stub": StubHost}


def load_host(model_id, seed=0):
    """Instantiate a host pipeline by id. Only the stub ships; recipes for
    real backbones live in the README."""
    try:
        factory = HOSTS[model_id]
    except KeyError:
        raise ValueError(
            f"unknown host {model_id!r}; available: {sorted(HOSTS)}"
        ) from None
    return factory(model_id=model_id, seed=seed)
