"""Pure-numpy GF(2) elimination kernels (fallback path).

Same contract as the numba variant in ``_gf2_numba``: rows are bit-packed
into little-endian uint64 words, column ``c`` lives at word ``c >> 6``,
bit ``c & 63``.

Internally this variant keeps the basis in *reduced* row echelon form (every
pivot column cleared from all other basis rows) so that inserting a row needs
a single gathered XOR and a full-rank solve is a direct readout.  The two
kernel implementations are interchangeable only through their public
functions, not through the raw basis arrays.
"""

from __future__ import annotations

import numpy as np


def _lowest_column(row: np.ndarray) -> int:
    nonzero = np.nonzero(row)[0]
    if nonzero.size == 0:
        return -1
    word_index = int(nonzero[0])
    word = int(row[word_index])
    return (word_index << 6) + ((word & -word).bit_length() - 1)


def echelon_insert(
    basis: np.ndarray,
    brhs: np.ndarray,
    pivot_slot: np.ndarray,
    rows: np.ndarray,
    rhs: np.ndarray,
    rank: int,
) -> int:
    """Insert packed rows into the basis, returning the new rank.

    ``pivot_slot`` maps a column to its basis slot or -1; incoming ``rows``
    and ``rhs`` are consumed.
    """
    # packed mask of current pivot columns, kept in step with pivot_slot
    n_cols_padded = basis.shape[1] * 64
    flags = (pivot_slot >= 0).astype(np.uint8)
    if flags.size < n_cols_padded:
        flags = np.concatenate([flags, np.zeros(n_cols_padded - flags.size, np.uint8)])
    pivot_mask = np.packbits(flags, bitorder="little").view(np.uint64).copy()

    n_new = rows.shape[0]
    for r in range(n_new):
        row = rows[r].copy()
        b = int(rhs[r])
        # RREF basis: one gathered XOR clears every pivot-column bit
        hits = row & pivot_mask
        if hits.any():
            cols = np.nonzero(np.unpackbits(hits.view(np.uint8), bitorder="little"))[0]
            slots = pivot_slot[cols]
            row ^= np.bitwise_xor.reduce(basis[slots], axis=0)
            b ^= int(brhs[slots].sum()) & 1
        col = _lowest_column(row)
        if col < 0:
            continue  # linearly dependent row
        # clear the fresh pivot column from every existing basis row
        if rank:
            carriers = np.nonzero(
                (basis[:rank, col >> 6] >> np.uint64(col & 63)) & np.uint64(1)
            )[0]
            if carriers.size:
                basis[carriers] ^= row
                brhs[carriers] ^= b
        basis[rank] = row
        brhs[rank] = b
        pivot_slot[col] = rank
        pivot_mask[col >> 6] |= np.uint64(1) << np.uint64(col & 63)
        rank += 1
    return rank


def gather_columns(
    rows: np.ndarray, word_idx: np.ndarray, bit_idx: np.ndarray, out: np.ndarray
) -> None:
    n_rows = rows.shape[0]
    bits = np.unpackbits(rows.view(np.uint8).reshape(n_rows, -1), axis=1, bitorder="little")
    cols = (word_idx << 6) + bit_idx.astype(np.int64)
    selected = bits[:, cols]
    packed = np.packbits(selected, axis=1, bitorder="little")
    out[:] = 0
    out.view(np.uint8)[:, : packed.shape[1]] = packed


def back_substitute(
    basis: np.ndarray,
    brhs: np.ndarray,
    pivot_slot: np.ndarray,
    ncols: int,
) -> np.ndarray:
    """Read the unique solution out of a full-rank reduced basis."""
    slots = pivot_slot[:ncols]
    if np.any(slots < 0):
        raise ValueError("system is not full rank; cannot back-substitute")
    # full rank means every column is a pivot, so the basis is the identity
    return brhs[slots].astype(np.uint8)
