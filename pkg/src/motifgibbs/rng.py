"""Seedable counter-based random streams.

Every stream is a Philox generator keyed by ``(seed, *stream_ids)``, so
parallel chains and datasets draw from independent, reproducible streams
regardless of scheduling order.
"""

import numpy as np


def stream(seed, *stream_ids):
    """Return a ``numpy.random.Generator`` for the given seed and stream path."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(s) for s in stream_ids))
    return np.random.Generator(np.random.Philox(ss))


def as_generator(rng):
    """Accept a Generator, an int seed, or None."""
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None:
        return np.random.Generator(np.random.Philox())
    return stream(rng)
