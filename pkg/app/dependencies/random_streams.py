# app/dependencies/random_streams.py

"""
Seeded random streams.

Every stream is a numpy Generator over PCG64, seeded from a SeedSequence
built from the 64-bit master seed and a spawn key naming the entity
(phase tag + index, or trial index). Same seed and key, same stream, on any
build that ships the same numpy bit generator.
"""

import numpy as np

MAX_SEED = 2 ** 64 - 1

# Spawn-key tags
UPLOAD = 1
DOWNLOAD = 2
DATASET = 3
TRIAL = 4
SPLIT_DEMO = 5


def _check_seed(seed: int) -> int:
    seed = int(seed)
    if seed < 0 or seed > MAX_SEED:
        raise ValueError(f"Seed must be in [0, 2**64 - 1], got {seed}")
    return seed


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """Generator for the entity identified by key under the master seed."""
    sequence = np.random.SeedSequence(_check_seed(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(sequence))


def derive_seed(seed: int, *key: int) -> int:
    """Derive a child 64-bit master seed, e.g. one per experiment trial."""
    sequence = np.random.SeedSequence(_check_seed(seed), spawn_key=tuple(int(k) for k in key))
    low, high = sequence.generate_state(2, dtype=np.uint32)
    return (int(high) << 32) | int(low)


class RandomStreams:
    """Per-entity streams for one simulation run."""

    def __init__(self, seed: int):
        self.seed = _check_seed(seed)

    def client(self, phase: int, index: int) -> np.random.Generator:
        return make_rng(self.seed, phase, index)

    def server(self, phase: int) -> np.random.Generator:
        # Clients use non-negative indices; -1 would be rejected by SeedSequence.
        return make_rng(self.seed, phase, 2 ** 32 - 1)
