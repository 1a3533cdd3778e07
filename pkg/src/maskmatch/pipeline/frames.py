"""PNG frame-directory video I/O. Frames are 8-bit RGB, filenames taken in
lexicographic order; arrays use unit range (F, 3, H, W)."""

from pathlib import Path

import numpy as np
from PIL import Image

from ..kernels import require_finite


def load_video(frame_dir):
    frame_dir = Path(frame_dir)
    files = sorted(p for p in frame_dir.iterdir() if p.suffix.lower() == ".png")
    if not files:
        raise ValueError(f"no PNG frames in {frame_dir}")
    frames = []
    shape = None
    for p in files:
        img = np.asarray(Image.open(p).convert("RGB"), dtype=np.float64) / 255.0
        if shape is None:
            shape = img.shape
        elif img.shape != shape:
            raise ValueError(f"frame {p.name} size {img.shape[:2]} differs from {shape[:2]}")
        frames.append(img.transpose(2, 0, 1))
    return np.stack(frames)


def save_video(video, frame_dir):
    video = np.asarray(video)
    require_finite(video, "video")
    frame_dir = Path(frame_dir)
    frame_dir.mkdir(parents=True, exist_ok=True)
    quantized = np.clip(np.round(video * 255.0), 0, 255).astype(np.uint8)
    paths = []
    for f in range(video.shape[0]):
        path = frame_dir / f"{f:05d}.png"
        Image.fromarray(quantized[f].transpose(1, 2, 0)).save(path)
        paths.append(path)
    return paths
