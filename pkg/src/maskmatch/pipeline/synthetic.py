"""Deterministic synthetic scenes for tests and fixtures.

``moving_square`` renders a colored square drifting over a smooth gradient
background and returns the matching per-frame ground-truth masks, which is
enough to exercise the whole profile/select/edit/eval chain without any
external dataset.
"""

import json
from pathlib import Path

import numpy as np

from ._seeding import rng_for
from .frames import save_video
from PIL import Image

PALETTE = {
    "red": (0.85, 0.15, 0.1),
    "green": (0.15, 0.75, 0.2),
    "blue": (0.15, 0.25, 0.85),
    "yellow": (0.9, 0.85, 0.1),
}


def moving_square(frames=4, size=64, seed=0, color=None):
    """Render the scene; returns (video (F,3,H,W) in [0,1], masks (F,H,W))."""
    rng = rng_for(seed, "scene")
    names = sorted(PALETTE)
    color_name = color if color is not None else names[int(rng.integers(len(names)))]
    fg = np.array(PALETTE[color_name])

    # smooth background gradient between two muted corners
    c0 = 0.25 + 0.2 * rng.random(3)
    c1 = 0.55 + 0.2 * rng.random(3)
    yy = np.linspace(0.0, 1.0, size)[:, None]
    xx = np.linspace(0.0, 1.0, size)[None, :]
    ramp = (yy + xx) / 2.0
    background = c0[:, None, None] + ramp[None] * (c1 - c0)[:, None, None]

    side = size // 3
    step = max(1, size // 16)
    max_start = size - side - step * (frames - 1) - 1
    y0 = int(rng.integers(1, max(2, max_start)))
    x0 = int(rng.integers(1, max(2, max_start)))

    video = np.empty((frames, 3, size, size))
    masks = np.zeros((frames, size, size), dtype=bool)
    for f in range(frames):
        top, left = y0 + f * step, x0 + f * step
        frame = background.copy()
        frame[:, top : top + side, left : left + side] = fg[:, None, None]
        video[f] = frame
        masks[f, top : top + side, left : left + side] = True
    return video, masks, color_name


def write_fixture_dataset(out_dir, videos=2, frames=4, size=64, seed=0):
    """Write a profile-ready dataset: frames, annotations, prompts.json.

    Layout: <out>/<name>/frames/*.png, <out>/<name>/annotations/*.png and a
    top-level prompts.json mapping name -> {prompt, word}.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    prompts = {}
    for v in range(videos):
        name = f"square{v}"
        video, masks, color_name = moving_square(frames, size, seed=seed + v)
        save_video(video, out_dir / name / "frames")
        ann_dir = out_dir / name / "annotations"
        ann_dir.mkdir(parents=True, exist_ok=True)
        for f in range(frames):
            Image.fromarray(masks[f].astype(np.uint8) * 255).save(
                ann_dir / f"{f:05d}.png"
            )
        prompts[name] = {"prompt": f"a {color_name} square moving", "word": "square"}
    with open(out_dir / "prompts.json", "w", encoding="utf-8") as f:
        json.dump(prompts, f, indent=1)
        f.write("\n")
    return out_dir
