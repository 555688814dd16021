"""Seeded random streams.

Every consumer derives its generator from ``(seed, *keys)`` through
``numpy.random.SeedSequence(seed, spawn_key=keys)``.  Keys are small
integers, the first one naming the consumer module (see ``STREAM_*``), so
that two modules never draw from the same stream and replays are exact.
"""

import numpy as np

STREAM_GEOMETRY = 1
STREAM_TSP = 2
STREAM_CALIBRATION = 3
STREAM_SIMULATOR = 4
STREAM_FIT = 5


def make_rng(seed, *keys):
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))
