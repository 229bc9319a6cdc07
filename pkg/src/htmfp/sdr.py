"""Sparse distributed representations.

An SDR is stored as its width plus the sorted array of active bit indices.
"""
from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np


class SDRError(ValueError):
    pass


class SDR:
    __slots__ = ("size", "active")

    def __init__(self, size: int, active: Iterable[int] = (), *, validate: bool = True):
        if validate:
            if size <= 0:
                raise SDRError(f"SDR size must be positive, got {size}")
            arr = np.asarray(list(active) if not isinstance(active, np.ndarray) else active,
                             dtype=np.int64)
            if arr.ndim != 1:
                raise SDRError("active indices must be one-dimensional")
            arr = np.unique(arr)
            if arr.size and (arr[0] < 0 or arr[-1] >= size):
                raise SDRError(f"active index out of range [0, {size})")
        else:
            arr = active  # caller guarantees sorted, unique, in-range int64
        self.size = int(size)
        self.active = arr

    @classmethod
    def from_dense(cls, bits) -> "SDR":
        bits = np.asarray(bits)
        return cls(bits.size, np.flatnonzero(bits).astype(np.int64), validate=False)

    def dense(self) -> np.ndarray:
        out = np.zeros(self.size, dtype=np.uint8)
        out[self.active] = 1
        return out

    @property
    def sparsity(self) -> float:
        return self.active.size / self.size

    def __len__(self) -> int:
        return int(self.active.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SDR):
            return NotImplemented
        return self.size == other.size and np.array_equal(self.active, other.active)

    def __hash__(self):
        return hash((self.size, self.active.tobytes()))

    def __repr__(self) -> str:
        return f"SDR(size={self.size}, active={self.active.tolist()})"


def concat(parts: Sequence[SDR]) -> SDR:
    """Join SDRs end to end, offsetting each part's indices by the widths before it."""
    if not parts:
        raise SDRError("concat needs at least one SDR")
    offset = 0
    chunks = []
    for part in parts:
        chunks.append(part.active + offset)
        offset += part.size
    return SDR(offset, np.concatenate(chunks), validate=False)


def overlap(a: SDR, b: SDR) -> int:
    if a.size != b.size:
        raise SDRError(f"size mismatch: {a.size} vs {b.size}")
    return int(np.intersect1d(a.active, b.active, assume_unique=True).size)
