"""Exhaustive enumeration of labeled DAGs on small node counts.

Graphs are encoded as integer bitmasks over ordered pairs (bit a*n + b set
iff edge a -> b), which keeps the n = 6 universe (3,781,503 DAGs) cheap to
deduplicate and to filter with vectorized numpy operations.
"""

from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np

__all__ = [
    "all_dag_masks",
    "masks_to_bits",
    "bits_to_mask",
    "batched_closure",
    "dag_universe",
    "DAG_COUNTS",
]

# Labeled DAG counts for n = 0..6, used as a self-check.
DAG_COUNTS = (1, 1, 3, 25, 543, 29281, 3781503)


@lru_cache(maxsize=None)
def all_dag_masks(n: int) -> np.ndarray:
    """Sorted int64 bitmasks of every labeled DAG on ``n`` nodes (n <= 6)."""
    if not 1 <= n <= 6:
        raise ValueError("exhaustive enumeration supports 1 <= n <= 6")
    chunks = []
    for perm in itertools.permutations(range(n)):
        bit_values = np.array(
            [
                1 << (perm[i] * n + perm[j])
                for i in range(n)
                for j in range(i + 1, n)
            ],
            dtype=np.int64,
        )
        masks = np.zeros(1, dtype=np.int64)
        for bit in bit_values:
            masks = np.concatenate([masks, masks | bit])
        chunks.append(masks)
    out = np.unique(np.concatenate(chunks))
    assert len(out) == DAG_COUNTS[n]
    return out


def masks_to_bits(masks: np.ndarray, n: int) -> np.ndarray:
    """Expand bitmasks to a (N, n, n) boolean adjacency array."""
    positions = np.arange(n * n, dtype=np.int64)
    bits = (masks[:, None] >> positions[None, :]) & 1
    return bits.astype(bool).reshape(len(masks), n, n)


def bits_to_mask(bits: np.ndarray) -> int:
    n = bits.shape[0]
    mask = 0
    for a in range(n):
        for b in range(n):
            if bits[a, b]:
                mask |= 1 << (a * n + b)
    return mask


def batched_closure(bits: np.ndarray) -> np.ndarray:
    """Transitive closure of every graph in a (N, n, n) boolean batch."""
    reach = bits.astype(np.uint8)
    n = bits.shape[-1]
    steps = max(1, int(np.ceil(np.log2(n))))
    for _ in range(steps):
        reach = (reach | (np.einsum("nij,njk->nik", reach, reach) > 0)).astype(np.uint8)
    return reach.astype(bool)


@lru_cache(maxsize=2)
def dag_universe(n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(masks, adjacency, closure) over every labeled DAG on ``n`` nodes.

    Cached because the n = 6 closure takes seconds and several exhaustive
    checks share it.
    """
    masks = all_dag_masks(n)
    bits = masks_to_bits(masks, n)
    return masks, bits, batched_closure(bits)
