"""Writer/reader for the attention-dump interchange format.

Deliberately self-contained: the adapter never imports the consumer
engine, it just emits the same bytes. Layout (little-endian): magic
``ATTN``, version u32 (=1), dtype u8 (0 = f32), ndim u8, ndim x u64 dims,
then the float32 row-major payload. Manifest: JSON array of records with
model_id, layer_index, timestep_index, spatial, frames, token_count,
token_strings, file.
"""

import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"ATTN"
VERSION = 1
DTYPE_F32 = 0


@dataclass
class ManifestRecord:
    model_id: str
    layer_index: int
    timestep_index: int
    spatial: tuple
    frames: int
    token_count: int
    token_strings: list = field(default_factory=list)
    file: str = ""

    def expected_dims(self):
        return (self.frames, self.spatial[0] * self.spatial[1], self.token_count)

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


def encode(tensor):
    arr = np.ascontiguousarray(np.asarray(tensor, dtype=np.float32))
    if not np.all(np.isfinite(arr)):
        raise ValueError("refusing to write non-finite attention values")
    header = MAGIC + struct.pack("<IBB", VERSION, DTYPE_F32, arr.ndim)
    header += struct.pack(f"<{arr.ndim}Q", *arr.shape)
    return header + arr.astype("<f4", copy=False).tobytes()


def decode(data):
    if len(data) < 10:
        raise ValueError("truncated: file shorter than fixed header")
    if data[:4] != MAGIC:
        raise ValueError(f"bad magic {data[:4]!r}")
    version, dtype, ndim = struct.unpack("<IBB", data[4:10])
    if version != VERSION:
        raise ValueError(f"unsupported version {version}")
    if dtype != DTYPE_F32:
        raise ValueError(f"unsupported dtype code {dtype}")
    dims_end = 10 + 8 * ndim
    if len(data) < dims_end:
        raise ValueError("truncated: file ends inside dims block")
    dims = struct.unpack(f"<{ndim}Q", data[10:dims_end])
    expected = 4 * int(np.prod(dims, dtype=np.int64)) if ndim else 4
    if len(data) - dims_end != expected:
        raise ValueError(f"truncated: payload {len(data) - dims_end} bytes, expected {expected}")
    return np.frombuffer(data[dims_end:], dtype="<f4").reshape(dims).copy()


def write_record(tensor, record: ManifestRecord, base_dir):
    arr = np.asarray(tensor, dtype=np.float32)
    if arr.shape != record.expected_dims():
        raise ValueError(
            f"tensor dims {arr.shape} disagree with record {record.expected_dims()}"
        )
    path = Path(base_dir) / record.file
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode(arr))
    return path


def write_manifest(records, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump([r.to_json() for r in records], f, indent=1)
        f.write("\n")
    return path


def read_manifest(path):
    with open(path, encoding="utf-8") as f:
        return [ManifestRecord.from_json(d) for d in json.load(f)]
