"""Named random streams.

Every run owns a single 64-bit seed. Components draw from their own stream,
derived with numpy's ``SeedSequence`` and fed to the counter-based Philox
bit generator, so adding draws in one component never shifts another.
"""
import zlib

import numpy as np


def make_rng(seed, stream):
    """Return a Philox-backed generator for the named stream of a run seed"""
    key = zlib.crc32(stream.encode("utf-8"))
    seq = np.random.SeedSequence(int(seed), spawn_key=(key,))
    return np.random.Generator(np.random.Philox(seq))
