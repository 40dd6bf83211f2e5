"""Run-seed derivation and generator construction.

A run's seed depends only on (master seed, strategy name, seed index):

    h    = fnv1a64(strategy.encode("utf-8"))
    seed = splitmix64(splitmix64(splitmix64(master) ^ h) ^ seed_index)

with all arithmetic modulo 2**64.  Every run then draws from
``numpy.random.Generator(Philox(seed))``, a counter-based generator whose
output stream is fixed by its key and identical across platforms.
"""

import numpy as np

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def fnv1a64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for byte in data:
        h ^= byte
        h = (h * 0x100000001B3) & MASK64
    return h


def derive_run_seed(master_seed: int, strategy: str, seed_index: int) -> int:
    h = fnv1a64(strategy.encode("utf-8"))
    inner = splitmix64(splitmix64(master_seed & MASK64) ^ h)
    return splitmix64(inner ^ (seed_index & MASK64))


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))
