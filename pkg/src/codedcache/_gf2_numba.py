"""Numba-compiled GF(2) elimination kernels (default path).

Bit layout matches ``_gf2_numpy``: little-endian packed uint64 words,
column ``c`` at word ``c >> 6``, bit ``c & 63``.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_M1 = np.uint64(0x5555555555555555)
_M2 = np.uint64(0x3333333333333333)
_M4 = np.uint64(0x0F0F0F0F0F0F0F0F)
_H01 = np.uint64(0x0101010101010101)
_ONE = np.uint64(1)


@njit(cache=True, inline="always")
def _popcount64(x):
    x = x - ((x >> _ONE) & _M1)
    x = (x & _M2) + ((x >> np.uint64(2)) & _M2)
    x = (x + (x >> np.uint64(4))) & _M4
    return (x * _H01) >> np.uint64(56)


@njit(cache=True, inline="always")
def _ctz64(x):
    # trailing zeros = popcount of (isolated lowest bit - 1)
    return _popcount64((x & (np.uint64(0) - x)) - _ONE)


@njit(cache=True)
def echelon_insert(basis, brhs, pivot_slot, rows, rhs, rank):
    n_new, n_words = rows.shape
    for r in range(n_new):
        b = rhs[r]
        w = 0
        while w < n_words:
            word = rows[r, w]
            if word == np.uint64(0):
                w += 1
                continue
            col = (w << 6) + int(_ctz64(word))
            slot = pivot_slot[col]
            if slot >= 0:
                for j in range(w, n_words):
                    rows[r, j] ^= basis[slot, j]
                b ^= brhs[slot]
                # the leading bit was cleared; re-scan the same word
            else:
                for j in range(w, n_words):
                    basis[rank, j] = rows[r, j]
                brhs[rank] = b
                pivot_slot[col] = rank
                rank += 1
                break
    return rank


@njit(cache=True)
def gather_columns(rows, word_idx, bit_idx, out):
    n_rows = rows.shape[0]
    m = word_idx.shape[0]
    out[:] = np.uint64(0)
    for r in range(n_rows):
        for j in range(m):
            bit = (rows[r, word_idx[j]] >> bit_idx[j]) & _ONE
            out[r, j >> 6] |= bit << np.uint64(j & 63)


@njit(cache=True)
def back_substitute(basis, brhs, pivot_slot, ncols):
    n_words = basis.shape[1]
    solution_words = np.zeros(n_words, dtype=np.uint64)
    out = np.zeros(ncols, dtype=np.uint8)
    for col in range(ncols - 1, -1, -1):
        slot = pivot_slot[col]
        if slot < 0:
            raise ValueError("system is not full rank; cannot back-substitute")
        acc = np.uint64(0)
        for j in range(n_words):
            acc += _popcount64(basis[slot, j] & solution_words[j])
        val = (brhs[slot] ^ np.uint8(acc & _ONE)) & np.uint8(1)
        if val:
            out[col] = 1
            solution_words[col >> 6] |= _ONE << np.uint64(col & 63)
    return out
