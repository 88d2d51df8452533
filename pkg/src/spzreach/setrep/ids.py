"""Monotone issuance of factor identifiers."""

from __future__ import annotations

import threading

import numpy as np


class IdGenerator:
    """Hands out strictly increasing positive integer identifiers.

    Safe to share between threads: each call to :meth:`fresh` reserves a
    contiguous block atomically.
    """

    def __init__(self, start: int = 1):
        if start < 1:
            raise ValueError("identifiers must be positive")
        self._next = int(start)
        self._lock = threading.Lock()

    @property
    def next(self) -> int:
        return self._next

    def fresh(self, k: int = 1) -> np.ndarray:
        k = int(k)
        if k < 0:
            raise ValueError("k must be non-negative")
        with self._lock:
            first = self._next
            self._next += k
        return np.arange(first, first + k, dtype=np.int64)

    def reserve_above(self, ids) -> None:
        """Make sure every later identifier exceeds all of ``ids``."""
        ids = np.asarray(ids, dtype=np.int64).reshape(-1)
        if ids.size == 0:
            return
        with self._lock:
            self._next = max(self._next, int(ids.max()) + 1)

    @classmethod
    def after(cls, *id_lists) -> "IdGenerator":
        gen = cls()
        for ids in id_lists:
            gen.reserve_above(ids)
        return gen
