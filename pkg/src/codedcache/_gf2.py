"""GF(2) linear algebra used by the delivery simulator.

The elimination kernels exist twice: a numba ``@njit`` build and a pure-numpy
fallback.  Selection is made once at import time: set ``CODEDCACHE_NO_NUMBA=1``
to force the numpy path (it is also used automatically when numba is not
importable).  ``benchmarks/bench_gf2.py`` compares the two.
"""

from __future__ import annotations

import os

import numpy as np

_FORCE_NUMPY = os.environ.get("CODEDCACHE_NO_NUMBA", "").strip() not in ("", "0")

if _FORCE_NUMPY:
    from . import _gf2_numpy as _impl

    USING_NUMBA = False
else:
    try:
        from . import _gf2_numba as _impl  # noqa: F401

        USING_NUMBA = True
    except ImportError:  # pragma: no cover - exercised only without numba
        from . import _gf2_numpy as _impl

        USING_NUMBA = False

echelon_insert = _impl.echelon_insert
back_substitute = _impl.back_substitute
gather_columns = _impl.gather_columns


def words_for(n_bits: int) -> int:
    return (n_bits + 63) >> 6


def pack_bits(bits: np.ndarray) -> np.ndarray:
    """Pack a 0/1 uint8 vector into little-endian uint64 words."""
    packed = np.packbits(bits.astype(np.uint8, copy=False), bitorder="little")
    n_words = words_for(bits.size)
    out = np.zeros(n_words * 8, dtype=np.uint8)
    out[: packed.size] = packed
    return out.view(np.uint64)


def pack_rows(bit_rows: np.ndarray) -> np.ndarray:
    """Pack a (T, n_bits) 0/1 matrix into (T, n_words) uint64."""
    t, n_bits = bit_rows.shape
    packed = np.packbits(bit_rows.astype(np.uint8, copy=False), axis=1, bitorder="little")
    n_words = words_for(n_bits)
    out = np.zeros((t, n_words * 8), dtype=np.uint8)
    out[:, : packed.shape[1]] = packed
    return out.view(np.uint64)


def unpack_bits(words: np.ndarray, n_bits: int) -> np.ndarray:
    bits = np.unpackbits(words.view(np.uint8), bitorder="little")
    return bits[:n_bits]


def and_parity(rows: np.ndarray, x_words: np.ndarray) -> np.ndarray:
    """Per-row parity of ``rows & x``: the GF(2) inner product with x."""
    counts = np.bitwise_count(rows & x_words[np.newaxis, :]).sum(axis=1)
    return (counts & 1).astype(np.uint8)


class EchelonSystem:
    """Incremental GF(2) system over a fixed set of unknown columns.

    With ``columns`` given, :meth:`insert_restricted` accepts full-width rows
    and extracts those columns on the fly.  Inserted rows are consumed.
    """

    def __init__(self, n_unknowns: int, columns: np.ndarray | None = None):
        self.n_unknowns = int(n_unknowns)
        n_words = max(1, words_for(self.n_unknowns))
        self._basis = np.zeros((max(1, self.n_unknowns), n_words), dtype=np.uint64)
        self._brhs = np.zeros(max(1, self.n_unknowns), dtype=np.uint8)
        self._pivot_slot = np.full(max(1, self.n_unknowns), -1, dtype=np.int64)
        self.rank = 0
        if columns is not None:
            columns = np.asarray(columns, dtype=np.int64)
            if columns.size != self.n_unknowns:
                raise ValueError("columns must match the unknown count")
            self._word_idx = columns >> 6
            self._bit_idx = (columns & 63).astype(np.uint64)

    @property
    def solvable(self) -> bool:
        return self.rank >= self.n_unknowns

    def insert(self, rows: np.ndarray, rhs: np.ndarray) -> None:
        if self.solvable or rows.shape[0] == 0:
            return
        self.rank = int(
            echelon_insert(self._basis, self._brhs, self._pivot_slot, rows, rhs, self.rank)
        )

    def insert_restricted(self, wide_rows: np.ndarray, rhs: np.ndarray) -> None:
        if self.solvable or wide_rows.shape[0] == 0:
            return
        narrow = np.empty(
            (wide_rows.shape[0], self._basis.shape[1]), dtype=np.uint64
        )
        gather_columns(wide_rows, self._word_idx, self._bit_idx, narrow)
        self.insert(narrow, rhs)

    def solve(self) -> np.ndarray:
        if not self.solvable:
            raise ValueError("system is not yet solvable")
        if self.n_unknowns == 0:
            return np.zeros(0, dtype=np.uint8)
        return back_substitute(self._basis, self._brhs, self._pivot_slot, self.n_unknowns)
