"""Capture head-averaged cross-attention maps from a diffusion pipeline
during DDIM inversion and serialize them into the maskmatch interchange
format (dumps + manifest)."""

from .capture import capture_run
from .format import ManifestRecord, read_manifest, write_manifest, write_record
from .hooks import HookRegistration, discover_cross_attention_sites, head_averaged_map
from .stub_host import StubHost, load_host
from .validate import validate_manifest

__all__ = [
    "HookRegistration",
    "ManifestRecord",
    "StubHost",
    "capture_run",
    "discover_cross_attention_sites",
    "head_averaged_map",
    "load_host",
    "read_manifest",
    "validate_manifest",
    "write_manifest",
    "write_record",
]
