"""Compiled rank kernels for batches of small coefficient matrices.

Each kernel inserts the received rows of one trial into an echelon basis and
stops as soon as the basis is full. They release the GIL, so blocks of trials
can run on a thread pool.
"""

import numba as nb
import numpy as np


@nb.njit(cache=True, nogil=True)
def rank_packed_gf2(rows, received, k):
    """rows: (T, N) uint64 with bit j = coefficient j. Returns (T,) int64 ranks."""
    n_trials, n_rows = rows.shape
    out = np.zeros(n_trials, dtype=np.int64)
    basis = np.zeros(64, dtype=np.uint64)
    for t in range(n_trials):
        basis[:] = 0
        rank = 0
        for i in range(n_rows):
            if not received[t, i]:
                continue
            v = rows[t, i]
            for b in range(k - 1, -1, -1):
                if (v >> np.uint64(b)) & np.uint64(1):
                    if basis[b] == 0:
                        basis[b] = v
                        rank += 1
                        break
                    v ^= basis[b]
            if rank == k:
                break
        out[t] = rank
    return out


@nb.njit(cache=True, nogil=True)
def rank_gf256(coeffs, received, exp, log):
    """coeffs: (T, N, K) uint8 over GF(2^8). Returns (T,) int64 ranks."""
    n_trials, n_rows, k = coeffs.shape
    out = np.zeros(n_trials, dtype=np.int64)
    basis = np.zeros((k, k), dtype=np.uint8)
    has = np.zeros(k, dtype=np.bool_)
    row = np.zeros(k, dtype=np.uint8)
    for t in range(n_trials):
        has[:] = False
        rank = 0
        for i in range(n_rows):
            if not received[t, i]:
                continue
            for c in range(k):
                row[c] = coeffs[t, i, c]
            for c in range(k):
                a = row[c]
                if a == 0:
                    continue
                if has[c]:
                    la = log[a]
                    for j in range(c + 1, k):
                        b = basis[c, j]
                        if b != 0:
                            row[j] ^= exp[la + log[b]]
                    row[c] = 0
                else:
                    # normalise so the pivot is 1
                    li = 255 - log[a]
                    for j in range(c, k):
                        b = row[j]
                        if b != 0:
                            basis[c, j] = exp[li + log[b]]
                        else:
                            basis[c, j] = 0
                    has[c] = True
                    rank += 1
                    break
            if rank == k:
                break
        out[t] = rank
    return out
