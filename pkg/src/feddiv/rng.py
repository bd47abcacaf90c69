"""Deterministic hierarchical random streams.

Every source of randomness in a run is a fork of one root stream, addressed
by a (purpose, *coordinates) path.  Two forks with the same path produce
identical draw sequences no matter when, in what order, or on which worker
they are instantiated, which is what makes client-parallel execution
reproduce serial runs bit for bit.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1


def _label_key(label: str) -> int:
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass(frozen=True)
class RngStream:
    """A forkable random stream identified by its path from the run seed."""

    path: tuple[int, ...]

    @classmethod
    def from_seed(cls, seed: int) -> "RngStream":
        return cls((int(seed) & _MASK64,))

    def child(self, purpose: str, *coords: int) -> "RngStream":
        """Fork a named sub-stream, e.g. ``stream.child("train", round, client)``."""
        return RngStream(self.path + (_label_key(purpose),) + tuple(int(c) & _MASK64 for c in coords))

    def generator(self) -> np.random.Generator:
        """A fresh generator positioned at the start of this stream."""
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(list(self.path))))
