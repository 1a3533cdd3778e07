"""Run a host's DDIM inversion and serialize every cross-attention map."""

from pathlib import Path

import numpy as np

from .format import ManifestRecord, write_manifest, write_record
from .hooks import discover_cross_attention_sites, head_averaged_map


def capture_run(host, frames, prompt, steps, out_dir):
    """Capture one inversion: one dump per (timestep, layer) plus manifest.

    ``frames`` is the clip's frame count. Returns the manifest path.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    sites, modules = discover_cross_attention_sites(host)
    tokens = host.tokenize(prompt)

    records = []
    current_step = {"t": 0}

    def make_hook(site):
        def hook(payload):
            averaged = head_averaged_map(payload)
            t = current_step["t"]
            f, s, token_count = averaged.shape
            side = int(round(np.sqrt(s)))
            if side * side != s:
                raise ValueError(f"{site.layer_path}: non-square attention size {s}")
            record = ManifestRecord(
                model_id=host.model_id,
                layer_index=site.layer_index,
                timestep_index=t,
                spatial=(side, side),
                frames=f,
                token_count=token_count,
                token_strings=list(tokens),
                file=f"t{t:03d}_l{site.layer_index}.attn",
            )
            write_record(averaged.astype(np.float32), record, out_dir)
            records.append(record)

        return hook

    for site, module in zip(sites, modules):
        module.attn_hook = make_hook(site)
    try:
        host.run_inversion(
            frames, prompt, steps, step_callback=lambda t: current_step.update(t=t + 1)
        )
    finally:
        for module in modules:
            module.attn_hook = None

    expected = steps * len(sites)
    if len(records) != expected:
        raise RuntimeError(
            f"capture incomplete: {len(records)} dumps, expected {expected}"
        )
    records.sort(key=lambda r: (r.timestep_index, r.layer_index))
    return write_manifest(records, out_dir / "manifest.json")
