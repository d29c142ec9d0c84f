"""
Seeded random streams.

All randomness in arsrank flows from one integer seed. Each consumer asks
for a named sub-stream (``"init"``, ``"shuffle"``, ``"negatives"``,
``"dynamic_negatives"``, ``"synth"``, ``"gradcheck"``) optionally keyed by an epoch number,
so components stay reproducible independently of one another and a
resumed run regenerates exactly the streams it would have used.
"""

import zlib

import numpy as np


def stream_id(name: str) -> int:
    """Stable 32-bit identifier of a stream name (independent of PYTHONHASHSEED)."""
    return zlib.crc32(name.encode("utf-8"))


def named_rng(seed: int, stream: str, *keys: int) -> np.random.Generator:
    """
    Returns a fresh Generator for ``(seed, stream, *keys)``.

    Example:
        >>> rng = named_rng(7, "shuffle", 3)   # shuffle stream of epoch 3
    """
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF, stream_id(stream)]
    entropy.extend(int(k) for k in keys)
    return np.random.default_rng(np.random.SeedSequence(entropy))
