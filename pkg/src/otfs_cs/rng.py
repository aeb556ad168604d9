"""Seeded random streams.

Every stream is a numpy ``Generator`` over the Philox-4x64 counter-based bit
generator, keyed by a 64-bit integer.  Keys for sub-streams are derived by
hashing a tuple of labels with BLAKE2b, so a trial's randomness depends only
on its labels and never on scheduling order.
"""

import hashlib

import numpy as np


def derive_seed(*parts) -> int:
    text = "\x1f".join(repr(p) if not isinstance(p, str) else p for p in parts)
    return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=8).digest(), "little")


def stream(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed)))


def complex_normal(rng: np.random.Generator, size, var: float = 1.0) -> np.ndarray:
    """Circular complex Gaussian samples with ``E|z|^2 = var``."""
    s = np.sqrt(var / 2.0)
    return s * (rng.standard_normal(size) + 1j * rng.standard_normal(size))
