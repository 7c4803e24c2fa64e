"""Seed derivation for reproducible, parallelizable experiments.

All randomness in the package flows through numpy's PCG64 bit generator,
seeded through ``SeedSequence`` so that a derived stream is a stable hash
of ``(master_seed, unit indices...)``.  There is no global generator state:
every sampler receives its own ``Generator`` or a raw 64-bit kernel seed.

Monte Carlo trial kernels (numba) additionally split a kernel seed into
per-trial streams with splitmix64, so trial results do not depend on
thread scheduling.
"""

from __future__ import annotations

import numpy as np

# Bump when the seeding scheme changes; recorded in experiment manifests.
RNG_SCHEME = "pcg64-seedseq-v1"


def seed_sequence(master: int, *key: int) -> np.random.SeedSequence:
    """Stable SeedSequence for (master seed, unit index...)."""
    return np.random.SeedSequence(master, spawn_key=tuple(int(k) for k in key))


def generator(master: int, *key: int) -> np.random.Generator:
    """Independent PCG64 stream derived from the master seed and unit key."""
    return np.random.Generator(np.random.PCG64(seed_sequence(master, *key)))


def kernel_seed(master: int, *key: int) -> int:
    """64-bit seed for numba kernels, derived like :func:`generator` streams."""
    return int(seed_sequence(master, *key).generate_state(1, np.uint64)[0])


def derive_seed(master: int, index: int) -> int:
    """Stable 64-bit hash of (master seed, unit index), for manifests."""
    return kernel_seed(master, index)
