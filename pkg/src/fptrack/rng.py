"""Counter-based per-trial random streams.

Every trial owns two independent streams, one for the walk increments V and
one for the observation noise W. A stream is a Philox generator keyed by the
master seed whose counter starts at a block reserved for the triple
``(sweep_index, trial_index, substream)``, so any trial can be replayed
without touching the others and scheduling never changes the draws.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

V_STREAM = 0
W_STREAM = 1
_MASK64 = (1 << 64) - 1


def stream(master_seed: int, sweep_index: int, trial_index: int, substream: int) -> np.random.Generator:
    # counter word 0 is the one Philox increments; the other three select the block
    key = np.array([master_seed & _MASK64, (master_seed >> 64) & _MASK64], dtype=np.uint64)
    counter = np.array([0, substream, trial_index, sweep_index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


@dataclass
class TrialStreams:
    v: np.random.Generator
    w: np.random.Generator


def trial_streams(master_seed: int, sweep_index: int, trial_index: int) -> TrialStreams:
    return TrialStreams(
        v=stream(master_seed, sweep_index, trial_index, V_STREAM),
        w=stream(master_seed, sweep_index, trial_index, W_STREAM),
    )


def check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed < 1 << 64:
        raise ValueError(f"master seed must be a 64-bit unsigned integer, got {seed}")
    return seed
