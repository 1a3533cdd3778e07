"""Desk-computable quality metric (masked PSNR) and profile reports.

Masked PSNR scores structure preservation: pixel MSE restricted to the
unedited region (the complement of the object annotation), or the whole
frame for stylization tasks where everything may legitimately change.
CLIP-based scores and LPIPS need pretrained encoders and are out of
scope; the report schema reserves their fields as null.
"""

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .mmc import MMCProfile

PSNR_CAP_DB = 99.0


def masked_psnr(x1, x0, unedited_mask):
    """PSNR (dB, MAX=1) between two unit-range videos over masked pixels.

    ``unedited_mask`` is (F, H, W) and selects the pixels that enter the
    MSE; pass an all-ones mask for whole-frame PSNR. Identical inputs are
    capped at 99 dB instead of returning infinity.
    """
    x1 = np.asarray(x1, dtype=np.float64)
    x0 = np.asarray(x0, dtype=np.float64)
    if x1.shape != x0.shape:
        raise ValueError(f"video shapes differ: {x1.shape} vs {x0.shape}")
    mask = np.asarray(unedited_mask, dtype=bool)
    if mask.shape != (x1.shape[0],) + x1.shape[2:]:
        raise ValueError(
            f"mask shape {mask.shape} does not match video frames {x1.shape}"
        )
    if not mask.any():
        raise ValueError("no unedited pixels: mask is empty")
    sel = np.broadcast_to(mask[:, None, :, :], x1.shape)
    mse = float(np.mean(((x1 - x0)[sel]) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(10.0 * math.log10(1.0 / mse), PSNR_CAP_DB)


def psnr_mask_for_task(annotation, task):
    """The region scored by masked PSNR: everything for stylization,
    otherwise the complement of the object annotation."""
    annotation = np.asarray(annotation, dtype=bool)
    if task == "stylization":
        return np.ones_like(annotation)
    return ~annotation


def _cost_csv(header, costs):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for i, c in enumerate(costs):
        writer.writerow([i, repr(float(c))])
    return buf.getvalue()


def emit_report(profile: MMCProfile, out_dir, per_video=None, psnr_table=None, plots=False):
    """Write report.json plus lmmc.csv / tmmc.csv (and optional PNG plots).

    report.json embeds the profile verbatim, so it re-parses into an equal
    MMCProfile. CSV floats are written with repr for byte stability.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    report = profile.to_json()
    report["per_video_d"] = [np.asarray(m).tolist() for m in per_video] if per_video else None
    report["masked_psnr"] = psnr_table
    report["clip_score"] = None
    report["temp_consistency"] = None
    report["lpips"] = None
    with open(out_dir / "report.json", "w", encoding="utf-8") as f:
        json.dump(report, f, indent=1)
        f.write("\n")

    (out_dir / "lmmc.csv").write_text(
        _cost_csv(["layer", "cost"], profile.layer_costs), encoding="utf-8"
    )
    (out_dir / "tmmc.csv").write_text(
        _cost_csv(["timestep", "cost"], profile.timestep_costs), encoding="utf-8"
    )

    if plots:
        _write_plots(profile, out_dir)
    return out_dir / "report.json"


def _write_plots(profile: MMCProfile, out_dir):
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return
    for name, costs, xlabel in (
        ("lmmc.png", profile.layer_costs, "layer"),
        ("tmmc.png", profile.timestep_costs, "timestep"),
    ):
        fig, ax = plt.subplots(figsize=(8, 6), dpi=100)
        ax.plot(range(len(costs)), costs, marker="o")
        ax.set_xlabel(xlabel)
        ax.set_ylabel("matching cost")
        fig.savefig(out_dir / name)
        plt.close(fig)
