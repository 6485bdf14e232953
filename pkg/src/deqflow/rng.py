"""Seeded, portable random streams.

Every run derives its generators from ``numpy.random.SeedSequence(seed)``:
child 0 feeds parameter initialization, child 1 feeds data sampling. PCG64 is
bit-reproducible across platforms, so a seed pins every number a run draws.
"""

import zlib

import numpy as np

INIT, DATA = 0, 1


def stream(seed: int, which: int) -> np.random.Generator:
    children = np.random.SeedSequence(int(seed)).spawn(2)
    return np.random.Generator(np.random.PCG64(children[which]))


def init_stream(seed: int) -> np.random.Generator:
    return stream(seed, INIT)


def data_stream(seed: int) -> np.random.Generator:
    return stream(seed, DATA)


def named_stream(seed: int, name: str) -> np.random.Generator:
    """Independent stream for auxiliary draws (verification instances, grids) keyed by ``name``."""
    key = zlib.crc32(name.encode("utf-8"))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), key])))
