"""Deterministic random-number streams.

Every stochastic component draws from an :class:`RngStream` identified by a
``(seed, stream)`` pair.  Streams built from the same pair replay the same
sample sequence on any platform (PCG64 seeded through ``SeedSequence``),
which makes runs reproducible independently of scheduling or batch layout.

Stream-id allocation used by the training harness:

====================  =======================================
stream id             purpose
====================  =======================================
0                     hierarchy weight initialization
1                     recurrent/action matrix seed derivation
1000 + b              simulation noise for batch element b
2000 + b              memory initialization for batch element b
3000 + b              action policy for batch element b
====================  =======================================
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Harness stream-id bases (see module docstring).
STREAM_PARAMS = 0
STREAM_MATRIX_SEEDS = 1
STREAM_NOISE_BASE = 1000
STREAM_MEMORY_BASE = 2000
STREAM_POLICY_BASE = 3000


@dataclass
class RngStream:
    """A stateful random stream addressed by (seed, stream id)."""

    seed: int
    stream: int = 0
    _gen: np.random.Generator = field(init=False, repr=False, default=None)

    def generator(self) -> np.random.Generator:
        if self._gen is None:
            ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream,))
            self._gen = np.random.Generator(np.random.PCG64(ss))
        return self._gen

    def standard_normal(self, shape):
        return self.generator().standard_normal(shape)

    def normal_block(self, steps: int, shape):
        """Pre-draw the noise for `steps` consecutive updates of a `shape` state."""
        if np.isscalar(shape):
            shape = (shape,)
        return self.generator().standard_normal((steps,) + tuple(shape))

    def integers(self, low, high=None, size=None):
        return self.generator().integers(low, high, size)

    def choice(self, a, size=None, replace=True):
        return self.generator().choice(a, size=size, replace=replace)


class BatchedStreams:
    """A bundle of per-element streams presenting the RngStream interface.

    Element ``b`` owns its stream, so trajectories of one batch element do
    not depend on how many other elements run alongside it.
    """

    def __init__(self, streams: list[RngStream]):
        self.streams = list(streams)

    @classmethod
    def for_batch(cls, seed: int, base: int, batch: int) -> "BatchedStreams":
        return cls([RngStream(seed, base + b) for b in range(batch)])

    def __len__(self):
        return len(self.streams)

    def standard_normal(self, shape):
        shape = tuple(shape)
        if shape[0] != len(self.streams):
            raise ValueError(
                f"leading dimension {shape[0]} does not match batch {len(self.streams)}"
            )
        return np.stack([s.standard_normal(shape[1:]) for s in self.streams])

    def normal_block(self, steps: int, shape):
        shape = tuple(shape)
        if shape[0] != len(self.streams):
            raise ValueError(
                f"leading dimension {shape[0]} does not match batch {len(self.streams)}"
            )
        blocks = [s.normal_block(steps, shape[1:]) for s in self.streams]
        return np.stack(blocks, axis=1)
