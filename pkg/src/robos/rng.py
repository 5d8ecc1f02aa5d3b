"""Named, independent random streams per run seed.

Each stream is a Philox counter-based generator keyed by (seed, crc32(name)), so
drawing more from one stream never shifts another.
"""

from __future__ import annotations

import zlib

import numpy as np

STREAM_NAMES = ("environment", "context", "noise", "policy", "objective")


def stream_key(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


def make_stream(seed: int, name: str) -> np.random.Generator:
    if seed < 0:
        raise ValueError("seeds must be nonnegative")
    ss = np.random.SeedSequence(int(seed), spawn_key=(stream_key(name),))
    return np.random.Generator(np.random.Philox(ss))


class RngStreams:
    def __init__(self, seed: int):
        self.seed = int(seed)
        self._streams: dict[str, np.random.Generator] = {}

    def __getitem__(self, name: str) -> np.random.Generator:
        if name not in self._streams:
            self._streams[name] = make_stream(self.seed, name)
        return self._streams[name]
