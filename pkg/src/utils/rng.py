"""
Counter-based random streams.

Every stream is a Philox generator keyed by (seed, stream tag, *indices), so a
draw depends only on where it sits in the experiment, never on which worker
produced it or in what order.
"""
from typing import List

import numpy as np

from ..config import config

STREAM_TAGS = {
    'joint': 1,
    'experiment': 2,
    'field': 3,
    'scenario': 4,
    'family': 5,
}


def stream(seed: int, tag: str, *indices: int) -> np.random.Generator:
    """Independent generator for one (seed, tag, indices) key."""
    if seed < 0 or seed >= 2 ** 64:
        raise ValueError(f"Seed must be a 64-bit unsigned integer, got {seed}")
    if tag not in STREAM_TAGS:
        raise ValueError(f"Unknown stream tag: {tag}")
    key = np.random.SeedSequence([int(seed), STREAM_TAGS[tag], *(int(i) for i in indices)])
    return np.random.Generator(np.random.Philox(key))


def chunk_sizes(n: int, chunk: int = None) -> List[int]:
    """Split n draws into fixed-size chunks; the last one may be shorter."""
    chunk = chunk or config.RNG_CHUNK
    full, rest = divmod(int(n), chunk)
    return [chunk] * full + ([rest] if rest else [])
