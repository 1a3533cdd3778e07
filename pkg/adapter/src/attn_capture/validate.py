"""Pre-flight validation mirroring the consumer engine's rules, so a
capture can be checked before shipping it anywhere."""

from pathlib import Path

import numpy as np

from .format import decode, read_manifest


def validate_manifest(manifest_path, row_sum_tol=1e-2):
    """Return a list of problem strings (empty means the capture is valid).

    Rules: every dump parses, dims match its record, each (t, l) pair is
    unique, the implied T x L grid is complete, and attention rows sum to
    1 within ``row_sum_tol`` (head averaging preserves row sums).
    """
    manifest_path = Path(manifest_path)
    if manifest_path.is_dir():
        manifest_path = manifest_path / "manifest.json"
    base = manifest_path.parent
    problems = []
    try:
        records = read_manifest(manifest_path)
    except (OSError, ValueError, KeyError) as exc:
        return [f"manifest unreadable: {exc}"]
    if not records:
        return ["manifest is empty"]

    seen = set()
    for r in records:
        key = (r.timestep_index, r.layer_index)
        if key in seen:
            problems.append(f"duplicate entry for (t={key[0]}, l={key[1]})")
        seen.add(key)
        try:
            arr = decode((base / r.file).read_bytes())
        except (OSError, ValueError) as exc:
            problems.append(f"(t={key[0]}, l={key[1]}) {r.file}: {exc}")
            continue
        if arr.shape != r.expected_dims():
            problems.append(
                f"(t={key[0]}, l={key[1]}) {r.file}: dims {arr.shape} != manifest {r.expected_dims()}"
            )
            continue
        worst = float(np.abs(arr.sum(axis=-1) - 1.0).max())
        if worst > row_sum_tol:
            problems.append(
                f"(t={key[0]}, l={key[1]}) {r.file}: row sums off by {worst:.3g}"
            )

    steps = 1 + max(t for t, _ in seen)
    layers = 1 + max(l for _, l in seen)
    for t in range(steps):
        for l in range(layers):
            if (t, l) not in seen:
                problems.append(f"missing dump for (t={t}, l={l})")
    return problems
