"""Seeded, chunked random draws that do not depend on the worker count."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np

CHUNK = 1 << 16


def chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), chunk]))


def chunked_draw(
    n: int,
    seed: int,
    draw: Callable[[np.random.Generator, int], np.ndarray],
    threads: int = 1,
) -> np.ndarray:
    """Concatenate ``draw(rng_c, size_c)`` over fixed-size chunks.

    Chunk ``c`` always uses the stream derived from ``(seed, c)``, so output is
    bit-identical for any ``threads``.
    """
    if n < 1:
        raise ValueError(f"sample size must be >= 1, got {n}")
    sizes = [min(CHUNK, n - start) for start in range(0, n, CHUNK)]
    jobs = [(c, size) for c, size in enumerate(sizes)]
    if threads <= 1 or len(jobs) == 1:
        parts = [draw(chunk_rng(seed, c), size) for c, size in jobs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda job: draw(chunk_rng(seed, job[0]), job[1]), jobs))
    return np.concatenate(parts, axis=0)
