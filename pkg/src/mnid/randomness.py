"""Deterministic random streams.

Every random draw in this package comes from a Philox (counter-based, 64-bit)
generator keyed by ``(seed, stream << 32 | sub)``.  Philox has no hidden
state beyond its key/counter, so identical keys produce identical streams on
every platform and numpy version that ships the bit generator.  Each logical
consumer owns a stream constant below; ``sub`` separates repeated uses inside
one run (e.g. the clustering round index).
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_MASK32 = (1 << 32) - 1

# Stream constants. Never renumber: report determinism depends on them.
STREAM_SYNTH_CENTERS = 1
STREAM_SYNTH_NOISE = 2
STREAM_KMEANS = 3
STREAM_GOLD_FEW = 4
STREAM_RANDOM_FEW = 5
STREAM_NCD_ROUND = 6


def generator(seed: int, stream: int, sub: int = 0) -> np.random.Generator:
    """Generator for one ``(seed, stream, sub)`` triple."""
    key = np.array(
        [seed & _MASK64, ((stream & _MASK32) << 32) | (sub & _MASK32)],
        dtype=np.uint64,
    )
    return np.random.Generator(np.random.Philox(key=key))


def subseed(seed: int, stream: int, sub: int = 0) -> int:
    """Derive a child seed, e.g. for a clustering call inside a pipeline."""
    return int(generator(seed, stream, sub).integers(0, 1 << 63))
