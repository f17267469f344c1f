"""Deterministic random-number streams.

Everything stochastic in this package draws from Philox, a counter-based
64-bit generator.  A stream is identified by (seed, replicate, substream):
the user-facing seed, the Monte-Carlo replicate index, and a purpose tag so
that independent concerns inside one replicate (tree shape, walk draws,
graph generation) never share a stream.  Streams are independent of worker
scheduling, so parallel runs reproduce serial runs exactly.
"""

from __future__ import annotations

import numpy as np

# Substream purpose tags.  The attempt counter for regeneration-on-failure
# protocols is packed into the low 32 bits next to the purpose tag, which
# keeps (purpose, attempt) pairs collision-free without arithmetic on the
# seed itself.
TREE = 1
WALK = 2
GRAPH = 3
INIT = 4


def derive_seed(seed: int, index: int) -> int:
    """A child seed for grid cell `index`, stable across runs.

    Uses the same multiplicative mixing as `stream`, so distinct indices
    give well-separated keys.
    """
    return (int(seed) ^ (int(index) * 0x9E3779B97F4A7C15)) % 2**64


def stream(
    seed: int, replicate: int = 0, purpose: int = 0, attempt: int = 0
) -> np.random.Generator:
    """Return the Generator for one (seed, replicate, purpose, attempt) cell.

    The Philox key has two 64-bit words: one mixes the seed with the
    replicate index, the other packs purpose and attempt.  Distinct cells
    get distinct keys, hence independent streams.
    """
    if not 0 <= attempt < 2**32:
        raise ValueError("attempt out of range")
    key = np.array(
        [
            (int(seed) ^ (int(replicate) * 0x9E3779B97F4A7C15)) % 2**64,
            (int(purpose) << 32) | int(attempt),
        ],
        dtype=np.uint64,
    )
    return np.random.Generator(np.random.Philox(key=key))
