"""Bit-exact interchange format for attention dumps, plus dataset reading
and prompt-token alignment.

Dump file layout (little-endian throughout):

    offset  size       field
    0       4          magic ``ATTN``
    4       4          version, u32 (currently 1)
    8       1          dtype code, u8 (0 = float32)
    9       1          ndim, u8
    10      8 * ndim   dims, u64 each
    ...     4 * prod   payload, float32 row-major

The manifest is a sidecar JSON array, one object per dump file, fields as
in :class:`DumpEntry`. Writers must be deterministic: rewriting the same
tensor yields identical bytes.
"""

import json
import struct
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
from PIL import Image

from .kernels import require_finite

MAGIC = b"ATTN"
VERSION = 1
DTYPE_F32 = 0


class DumpError(ValueError):
    """Dump parse failure with a machine-readable ``code``."""

    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


@dataclass
class DumpEntry:
    """Manifest record describing one (layer, timestep) attention dump."""

    model_id: str
    layer_index: int
    timestep_index: int
    spatial: tuple  # (h', w') of the attention layer
    frames: int
    token_count: int
    token_strings: list = field(default_factory=list)
    file: str = ""

    def expected_dims(self):
        h, w = self.spatial
        return (self.frames, int(h) * int(w), self.token_count)

    def to_json(self):
        d = asdict(self)
        d["spatial"] = list(self.spatial)
        return d

    @classmethod
    def from_json(cls, d):
        return cls(
            model_id=d["model_id"],
            layer_index=int(d["layer_index"]),
            timestep_index=int(d["timestep_index"]),
            spatial=(int(d["spatial"][0]), int(d["spatial"][1])),
            frames=int(d["frames"]),
            token_count=int(d["token_count"]),
            token_strings=list(d["token_strings"]),
            file=d["file"],
        )


@dataclass
class TokenAlignment:
    """Token indices covering one word of the prompt."""

    word: str
    token_indices: list

    def __post_init__(self):
        if not self.token_indices:
            raise ValueError("alignment must cover at least one token")
        idx = list(self.token_indices)
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError("token indices must be strictly increasing")


def encode_dump(tensor):
    """Serialize a tensor to dump-format bytes (float32 LE payload)."""
    arr = np.asarray(tensor, dtype=np.float32)
    require_finite(arr, "dump tensor")
    header = MAGIC + struct.pack("<IBB", VERSION, DTYPE_F32, arr.ndim)
    header += struct.pack(f"<{arr.ndim}Q", *arr.shape)
    payload = np.ascontiguousarray(arr).astype("<f4", copy=False).tobytes()
    return header + payload


def decode_dump(data):
    """Parse dump-format bytes; raises DumpError with a distinct code per defect."""
    if len(data) < 10:
        raise DumpError("truncated", "file shorter than fixed header")
    if data[:4] != MAGIC:
        raise DumpError("bad_magic", f"bad magic {data[:4]!r}")
    version, dtype, ndim = struct.unpack("<IBB", data[4:10])
    if version != VERSION:
        raise DumpError("unsupported_version", f"unsupported version {version}")
    if dtype != DTYPE_F32:
        raise DumpError("unsupported_dtype", f"unsupported dtype code {dtype}")
    dims_end = 10 + 8 * ndim
    if len(data) < dims_end:
        raise DumpError("truncated", "file ends inside dims block")
    dims = struct.unpack(f"<{ndim}Q", data[10:dims_end])
    count = 1
    for d in dims:
        count *= d
    if len(data) - dims_end != 4 * count:
        raise DumpError(
            "truncated",
            f"payload is {len(data) - dims_end} bytes, expected {4 * count}",
        )
    arr = np.frombuffer(data[dims_end:], dtype="<f4").reshape(dims)
    require_finite(arr, "dump payload")
    return arr.astype(np.float32, copy=True)


def write_dump(tensor, entry, base_dir):
    """Write ``tensor`` to ``base_dir/entry.file`` after checking the manifest entry."""
    arr = np.asarray(tensor, dtype=np.float32)
    if arr.shape != entry.expected_dims():
        raise ValueError(
            f"tensor dims {arr.shape} disagree with manifest entry "
            f"{entry.expected_dims()} for (t={entry.timestep_index}, l={entry.layer_index})"
        )
    path = Path(base_dir) / entry.file
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_dump(arr))
    return path


def read_dump(path):
    path = Path(path)
    return decode_dump(path.read_bytes())


def write_manifest(entries, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump([e.to_json() for e in entries], f, indent=1)
        f.write("\n")


def read_manifest(path):
    with open(path, encoding="utf-8") as f:
        raw = json.load(f)
    return [DumpEntry.from_json(d) for d in raw]


def validate_manifest(manifest_path, check_payload=True, row_sum_tol=1e-2):
    """Check manifest + dumps; returns a list of problem strings (empty = ok).

    Rules: files parse, dims match the entry, each (t, l) appears once, the
    implied T x L grid is complete, and rows of each map sum to 1 within
    ``row_sum_tol`` (relaxed to admit head-averaged maps).
    """
    manifest_path = Path(manifest_path)
    base = manifest_path.parent
    problems = []
    try:
        entries = read_manifest(manifest_path)
    except (OSError, ValueError, KeyError) as exc:
        return [f"manifest unreadable: {exc}"]
    if not entries:
        return ["manifest is empty"]

    seen = {}
    for e in entries:
        key = (e.timestep_index, e.layer_index)
        if key in seen:
            problems.append(f"duplicate entry for (t={key[0]}, l={key[1]})")
        seen[key] = e
        if not check_payload:
            continue
        try:
            arr = read_dump(base / e.file)
        except DumpError as exc:
            problems.append(f"(t={key[0]}, l={key[1]}) {e.file}: {exc.code}: {exc}")
            continue
        except OSError as exc:
            problems.append(f"(t={key[0]}, l={key[1]}) {e.file}: unreadable: {exc}")
            continue
        if arr.shape != e.expected_dims():
            problems.append(
                f"(t={key[0]}, l={key[1]}) {e.file}: dims {arr.shape} != manifest {e.expected_dims()}"
            )
            continue
        sums = arr.sum(axis=-1)
        worst = float(np.abs(sums - 1.0).max())
        if worst > row_sum_tol:
            problems.append(
                f"(t={key[0]}, l={key[1]}) {e.file}: row sums off by {worst:.3g} (> {row_sum_tol})"
            )

    steps = 1 + max(t for t, _ in seen)
    layers = 1 + max(l for _, l in seen)
    missing = [(t, l) for t in range(steps) for l in range(layers) if (t, l) not in seen]
    for t, l in missing:
        problems.append(f"missing dump for (t={t}, l={l})")
    return problems


def load_reference_masks(mask_dir, frames):
    """Load per-frame binary reference masks from a directory of PNGs.

    Filenames are taken in lexicographic order; any nonzero pixel counts as
    foreground (no thresholding involved).
    """
    mask_dir = Path(mask_dir)
    files = sorted(p for p in mask_dir.iterdir() if p.suffix.lower() == ".png")
    if len(files) != frames:
        raise ValueError(
            f"annotation directory {mask_dir} holds {len(files)} masks, expected {frames} frames"
        )
    grids = []
    shape = None
    for p in files:
        img = np.asarray(Image.open(p).convert("L"))
        if shape is None:
            shape = img.shape
        elif img.shape != shape:
            raise ValueError(f"mask {p.name} size {img.shape} differs from {shape}")
        grids.append(img > 0)
    return np.stack(grids)


def tokenize(prompt):
    """Word-level toy tokenization: a start token then one token per word."""
    tokens = ["<start>"] + prompt.split()
    return [(tok, i) for i, tok in enumerate(tokens)]


def align_token(prompt, word, tokenization):
    """Find the token indices covering the first occurrence of ``word``.

    Matching is case-folded and whitespace-trimmed. A word split across
    consecutive sub-tokens is matched by concatenation, so all covering
    indices are returned.
    """
    target = word.strip().casefold()
    if not target:
        raise ValueError("empty word")
    toks = [(t.strip().casefold(), i) for t, i in tokenization]
    for start in range(len(toks)):
        acc = ""
        indices = []
        for t, i in toks[start:]:
            acc += t
            indices.append(i)
            if acc == target:
                return TokenAlignment(word=word, token_indices=indices)
            if len(acc) >= len(target):
                break
    raise ValueError(f"token not found: {word!r} has no alignment in the prompt {prompt!r}")
