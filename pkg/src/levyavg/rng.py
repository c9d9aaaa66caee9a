"""Reproducible, independent random streams.

Every stream is addressed by ``(seed, stream_id, path)`` and maps to a
Philox counter-based generator keyed through :class:`numpy.random.SeedSequence`.
Streams are plain immutable values; drawing from one never mutates it, so
the same value always replays the same sequence.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

_U64 = 2**64


def tag_id(tag: str) -> int:
    """Stable 64-bit identifier for an experiment tag."""
    digest = hashlib.blake2b(tag.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


@dataclass(frozen=True)
class RngStream:
    """Address of an independent random stream.

    Parameters
    ----------
    seed : int
        Experiment-wide seed, 0 <= seed < 2**64.
    stream_id : int
        Identifier of the stream family, 0 <= stream_id < 2**64.
    path : tuple of int
        Hierarchical sub-stream index (e.g. path index, then noise channel).
    """

    seed: int
    stream_id: int = 0
    path: tuple = ()

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or not 0 <= int(v) < _U64:
                raise ValueError(f"{name} must be an integer in [0, 2**64), got {v!r}")
        for v in self.path:
            if not isinstance(v, (int, np.integer)) or int(v) < 0:
                raise ValueError(f"path entries must be non-negative integers, got {v!r}")

    @classmethod
    def from_tag(cls, seed: int, tag: str) -> "RngStream":
        return cls(seed, tag_id(tag))

    def child(self, *index: int) -> "RngStream":
        """Sub-stream; distinct indices give independent streams."""
        return RngStream(self.seed, self.stream_id, self.path + tuple(int(i) for i in index))

    def generator(self) -> np.random.Generator:
        """A fresh generator positioned at the start of this stream."""
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream_id),) + self.path)
        return np.random.Generator(np.random.Philox(ss))


def as_generator(rng) -> np.random.Generator:
    """Accept an :class:`RngStream` or an existing numpy Generator."""
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng).__name__}")
