"""Counter-based random streams keyed by replicate, generation and particle.

Every particle owns a Philox stream determined by ``(seed, replicate)`` as the
key and ``(generation, label)`` inside the counter.  Results therefore do not
depend on thread scheduling, chunking or on which siblings were pruned.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
ROOT_LABEL = 0


def child_label(parent: int, j: int) -> int:
    """Hashed Ulam-Harris label of child ``j`` (0-based) of ``parent``."""
    z = (parent + (j + 1) * GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def particle_stream(seed: int, replicate: int, generation: int, label: int) -> np.random.Generator:
    """Generator for one particle's offspring draws."""
    bitgen = np.random.Philox(
        key=np.array([seed & MASK64, replicate & MASK64], dtype=np.uint64),
        counter=np.array([0, label & MASK64, generation & MASK64, 0], dtype=np.uint64))
    return np.random.Generator(bitgen)


def replicate_stream(seed: int, replicate: int, purpose: int = 1) -> np.random.Generator:
    """Auxiliary stream for per-replicate work outside the population recursion.

    ``purpose`` occupies the last counter word, which the particle streams
    leave at zero, so the two families never overlap.
    """
    bitgen = np.random.Philox(
        key=np.array([seed & MASK64, replicate & MASK64], dtype=np.uint64),
        counter=np.array([0, 0, 0, purpose & MASK64], dtype=np.uint64))
    return np.random.Generator(bitgen)
