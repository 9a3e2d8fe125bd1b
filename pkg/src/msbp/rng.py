"""Seedable, splittable random streams.

Every sampler in this package draws from a counter-based Philox generator.
Sub-streams are derived from a root seed plus a tuple of integer keys via
``numpy.random.SeedSequence`` spawn keys, so replicate r of experiment e gets
an independent stream that depends only on ``(seed, e, r)`` and never on
scheduling order.
"""

from __future__ import annotations

import numpy as np

__all__ = ["substream", "as_generator"]


def substream(seed: int, *keys: int) -> np.random.Generator:
    """Return a Generator for the sub-stream identified by ``keys``.

    Equal ``(seed, keys)`` give bit-for-bit identical streams; distinct key
    tuples give statistically independent streams.
    """
    if seed is None:
        raise ValueError("seed must be an integer, not None")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


def as_generator(rng, seed: int = 0, *keys: int) -> np.random.Generator:
    """Coerce ``rng`` to a Generator; ``None`` means the default sub-stream."""
    if rng is None:
        return substream(seed, *keys)
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(rng))))
