"""Deterministic RNG streams.

Every stochastic component in the package draws from a generator keyed by a
tuple of non-negative integers.  Two calls with the same key tuple yield the
same stream, independent of platform, thread count, or call order, which is
what makes parallel and serial generation bit-identical.
"""

from __future__ import annotations

import numpy as np

__all__ = ["substream_seed", "substream"]


def substream_seed(*keys: int) -> int:
    """Collapse a key tuple to a single u64 usable as a recordable seed."""
    seq = np.random.SeedSequence([int(k) for k in keys])
    return int(seq.generate_state(1, np.uint64)[0])


def substream(*keys: int) -> np.random.Generator:
    """Generator for the stream identified by the key tuple."""
    return np.random.default_rng(substream_seed(*keys))
