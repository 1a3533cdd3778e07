"""Deterministic RNG derivation. Python's builtin hash() is salted per
process, so named streams are derived through blake2b instead."""

import hashlib

import numpy as np


def stream_seed(*parts):
    tag = "\x1f".join(str(p) for p in parts).encode("utf-8")
    return int.from_bytes(hashlib.blake2b(tag, digest_size=8).digest(), "little")


def rng_for(*parts):
    return np.random.default_rng(stream_seed(*parts))
