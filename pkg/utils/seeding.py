"""Named seed derivation.

A master seed fans out into independent streams through
``numpy.random.SeedSequence``. The spawn key of a stream is
``(crc32(name), repeat, *extra)`` so that, for example, the benchmark
permutations of repeat 2 never share entropy with the simulation
permutations of the same repeat.
"""

import zlib
from typing import Tuple

import numpy as np

SEED_NAMES: Tuple[str, ...] = (
    "data",
    "benchmark",
    "init",
    "shuffle",
    "memory",
    "policy",
    "simulation",
)


def derive_seed(master_seed: int, name: str, *keys: int) -> int:
    """Derive a 32-bit seed for the stream ``name``.

    Args:
        master_seed: Experiment master seed (non-negative)
        name: Stream name, normally one of ``SEED_NAMES``
        keys: Extra non-negative integers (repeat index, task index, ...)

    Returns:
        int: Seed usable with ``numpy.random.default_rng``
    """
    spawn_key = (zlib.crc32(name.encode("utf-8")),) + tuple(int(k) for k in keys)
    sequence = np.random.SeedSequence(int(master_seed), spawn_key=spawn_key)
    return int(sequence.generate_state(1, dtype=np.uint32)[0])


def make_rng(master_seed: int, name: str, *keys: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master_seed, name, *keys))


class SeedBundle:
    """All named seeds of one repeat of an experiment."""

    def __init__(self, master_seed: int, repeat: int = 0):
        self.master_seed = int(master_seed)
        self.repeat = int(repeat)

    def seed(self, name: str, *keys: int) -> int:
        return derive_seed(self.master_seed, name, self.repeat, *keys)

    def rng(self, name: str, *keys: int) -> np.random.Generator:
        return np.random.default_rng(self.seed(name, *keys))

    def benchmark_seeds(self, count: int) -> list:
        """Permutation seeds for the real task sequence."""
        return [self.seed("benchmark", t) for t in range(count)]

    def simulation_seed(self, task_index: int) -> int:
        return self.seed("simulation", task_index)

    def __repr__(self) -> str:
        return f"SeedBundle(master_seed={self.master_seed}, repeat={self.repeat})"
