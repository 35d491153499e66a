"""Seeded random streams.

All randomness flows from one master seed. Each consumer asks for a named
stream (optionally with extra integer keys such as an arm index or bootstrap
replicate), which is derived through ``numpy.random.SeedSequence`` spawn keys.
Streams never share state, so the order in which stages run cannot change
their draws.
"""

import numpy as np

STREAMS = {
    "split": 0,
    "validation": 1,
    "init": 2,
    "shuffle": 3,
    "bootstrap": 4,
    "synthetic": 5,
}


def stream(seed: int, name: str, *keys: int) -> np.random.Generator:
    """Return the generator for stream ``name`` derived from ``seed``."""
    if name not in STREAMS:
        raise KeyError(f"unknown random stream {name!r}")
    ss = np.random.SeedSequence(int(seed), spawn_key=(STREAMS[name], *map(int, keys)))
    return np.random.Generator(np.random.PCG64(ss))
