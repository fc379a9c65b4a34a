"""Counter-based per-trajectory seeds.

``seed_split`` is a bijection of the trajectory index for a fixed master seed
(a Weyl step followed by the splitmix64 finalizer, both invertible mod 2**64),
so distinct indices can never collide and the seed of trajectory ``i`` does not
depend on how trajectories are scheduled across workers.
"""
from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def seed_split(master_seed: int, index: int) -> int:
    if not 0 <= master_seed <= MASK64:
        raise ValueError("master_seed must be an unsigned 64-bit integer")
    if index < 0:
        raise ValueError("trajectory index must be nonnegative")
    return _mix((master_seed + (index + 1) * GOLDEN) & MASK64)


def seed_split_many(master_seed: int, indices: np.ndarray) -> np.ndarray:
    """Vectorized ``seed_split`` (uint64 arithmetic wraps mod 2**64)."""
    idx = np.asarray(indices, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(master_seed) + (idx + np.uint64(1)) * np.uint64(GOLDEN)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def path_generator(master_seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed_split(master_seed, index)))
