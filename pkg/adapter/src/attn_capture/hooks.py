"""Cross-attention site discovery and capture normalisation.

Hosts differ in what their attention modules expose. Two capture payloads
are supported:

- ``attn_probs``: per-head attention probabilities (heads, F, S, S');
  averaged over heads directly.
- ``query``/``key``: per-head projections (heads, F, S, d) and
  (heads, F, S', d); attention is recomputed as softmax(Q K^T * scale)
  before head averaging, for hosts that only expose fused outputs.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class HookRegistration:
    """One discovered cross-attention site, indexed in forward order."""

    layer_path: str
    layer_index: int


def discover_cross_attention_sites(host):
    """Walk the host's modules in forward order and register attention sites.

    A module is a cross-attention site when it advertises
    ``is_cross_attention = True``. Indices are contiguous from 0 and stable
    across timesteps because module order is fixed by the architecture.
    """
    sites = []
    modules = []
    for path, module in host.named_modules():
        if getattr(module, "is_cross_attention", False):
            sites.append(HookRegistration(layer_path=path, layer_index=len(sites)))
            modules.append(module)
    if not sites:
        raise ValueError(f"no cross-attention sites found in host {host!r}")
    return sites, modules


def _softmax(logits):
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def head_averaged_map(payload):
    """Normalise a capture payload to a head-averaged (F, S, S') map."""
    if "attn_probs" in payload:
        probs = np.asarray(payload["attn_probs"], dtype=np.float64)
    elif "query" in payload and "key" in payload:
        q = np.asarray(payload["query"], dtype=np.float64)
        k = np.asarray(payload["key"], dtype=np.float64)
        scale = payload.get("scale")
        if scale is None:
            scale = 1.0 / np.sqrt(q.shape[-1])
        logits = np.einsum("hfsd,hftd->hfst", q, k) * scale
        probs = _softmax(logits)
    else:
        raise ValueError(f"capture payload exposes neither probs nor q/k: {sorted(payload)}")
    if probs.ndim != 4:
        raise ValueError(f"expected (heads, F, S, S'), got {probs.shape}")
    return probs.mean(axis=0)
