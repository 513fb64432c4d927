"""
Seeded RNG streams
One base seed, one independent numpy Generator per purpose. Sub-streams are
derived from a stable crc32 of the stream name, never from hash().
"""

from __future__ import annotations

import zlib

import numpy as np

NETWORK_GEN = "network-gen"
SPAWNING = "spawning"
PATHS = "paths"
EPISODE_RESET = "episode-reset"
OBSERVATION_SAMPLING = "observation-sampling"
POLICY = "policy"

STREAM_NAMES = (NETWORK_GEN, SPAWNING, PATHS, EPISODE_RESET,
                OBSERVATION_SAMPLING, POLICY)

_SEED_MASK = 0xFFFFFFFFFFFFFFFF


def _tag(name):
    return zlib.crc32(name.encode("utf-8")) & 0xFFFFFFFF


def derive_generator(seed, name):
    """Independent Generator for (seed, name)."""
    seq = np.random.SeedSequence([int(seed) & _SEED_MASK, _tag(name)])
    return np.random.default_rng(seq)


class RngStreams:
    """Named, lazily created generators sharing one base seed.

    Drawing from one stream never changes what another stream yields.
    """

    def __init__(self, seed):
        self.seed = int(seed) & _SEED_MASK
        self._streams = {}

    def get(self, name):
        if name not in self._streams:
            self._streams[name] = derive_generator(self.seed, name)
        return self._streams[name]

    def __getitem__(self, name):
        return self.get(name)

    def derive_int(self, name):
        """A 63-bit integer seed for libraries with their own RNG (torch)."""
        return int(derive_generator(self.seed, name + "/int").integers(0, 2**63 - 1))
