"""Seedable, splittable counter-based random streams.

Every Monte-Carlo routine in the package draws its samples in fixed-size
chunks; chunk ``c`` of a computation seeded with ``seed`` always uses the
Philox stream keyed by ``SeedSequence([seed, c])``.  Results are therefore
bit-reproducible no matter how the chunks are scheduled.
"""

from __future__ import annotations

import numpy as np

CHUNK = 8192


def stream(seed: int, chunk: int = 0) -> np.random.Generator:
    """Return the Philox generator for sub-stream ``(seed, chunk)``."""
    if seed < 0 or chunk < 0:
        raise ValueError("seed and chunk must be non-negative")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, chunk])))


def chunk_sizes(samples: int, chunk: int = CHUNK) -> list[int]:
    """Split ``samples`` into consecutive chunk lengths (last one may be short)."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    full, rest = divmod(samples, chunk)
    return [chunk] * full + ([rest] if rest else [])
