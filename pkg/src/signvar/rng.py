"""Splittable random streams.

Every stochastic routine in the package draws from an `RngStream`, a PCG64
generator keyed by (seed, stream_id). Streams with different ids are
statistically independent, so work can be farmed out across threads in any
order and still reproduce bit-for-bit: each consumer owns its stream and
nobody else touches it.

Stream id layout used by the chain runner (documented so archives can be
reproduced exactly):

    0        general / scratch
    1        factor draws
    2 + i    everything specific to equation i (VAR coefficients,
             shrinkage scales, loadings, variance)

Monte Carlo replication j derives an independent chain seed via
``derive_seed(seed, j)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["RngStream", "derive_seed", "FACTOR_STREAM", "EQUATION_STREAM_BASE"]

FACTOR_STREAM = 1
EQUATION_STREAM_BASE = 2


@dataclass
class RngStream:
    """A named, reproducible random stream.

    Same (seed, stream_id) always yields the same sequence; distinct
    stream_ids are independent. The underlying generator is created
    lazily and owned exclusively by this object.
    """

    seed: int
    stream_id: int = 0
    _gen: np.random.Generator = field(init=False, repr=False, default=None)

    def __post_init__(self) -> None:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        self._gen = np.random.Generator(np.random.PCG64(ss))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def fresh(self) -> "RngStream":
        """A rewound copy of this stream (same sequence from the start)."""
        return RngStream(self.seed, self.stream_id)


def derive_seed(seed: int, index: int) -> int:
    """A 63-bit seed for sub-experiment `index`, independent across indices."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(0x5EED, index))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> 1)
