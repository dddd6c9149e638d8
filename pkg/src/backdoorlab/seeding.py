"""Named random sub-streams derived from one global seed.

``substream(seed, "shuffle")`` always yields the same generator for the same
pair, independently of how many other streams were drawn before it, so a
single component (poison selection, init, shuffling, dropout, augmentation)
can be replayed on its own.
"""
import zlib

import numpy as np

STREAMS = ("poison", "init", "shuffle", "dropout", "augment")


def substream(seed, name):
    key = zlib.crc32(str(name).encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence([int(seed), key]))
