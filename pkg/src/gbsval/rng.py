"""Named, splittable random substreams.

Every random draw in the package comes from ``substream(seed, name, *index)``
so that results depend only on the master seed and the (name, index) key,
never on worker count or scheduling order.
"""

from __future__ import annotations

import zlib

import numpy as np


def stream_key(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


def substream(seed: int | None, name: str, *index: int) -> np.random.Generator:
    """Return an independent generator for ``(seed, name, *index)``.

    ``seed=None`` draws fresh OS entropy (non-reproducible).
    """
    if seed is not None and int(seed) < 0:
        raise ValueError("seed must be non-negative")
    entropy = None if seed is None else int(seed)
    seq = np.random.SeedSequence(entropy, spawn_key=(stream_key(name), *map(int, index)))
    return np.random.default_rng(seq)
