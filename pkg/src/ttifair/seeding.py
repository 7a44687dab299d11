"""Named deterministic PRNG streams derived from one master seed.

Every randomized stage pulls from its own labelled stream, so adding or
reordering stages never perturbs the draws of another stage, and any
stage can be re-run in isolation.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _label_entropy(label: str | int) -> int:
    if isinstance(label, int):
        return label & _MASK64
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def stream(master_seed: int, *labels: str | int) -> np.random.Generator:
    """Generator for the stream named by ``labels`` under ``master_seed``."""
    entropy = [int(master_seed) & _MASK64] + [_label_entropy(x) for x in labels]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def draw_seeds(rng: np.random.Generator, n: int) -> list[int]:
    """Draw ``n`` independent 63-bit generation seeds."""
    return [int(x) for x in rng.integers(0, 1 << 63, size=n, dtype=np.uint64)]
