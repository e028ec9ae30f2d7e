"""Arithmetic over GF(2) and GF(2^8), plus rank computation for coefficient matrices.

Elements of both fields are stored as ``uint8``; GF(2) only uses 0 and 1.
GF(2^8) multiplication goes through log/antilog tables built once per
:class:`FieldSpec`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

SUPPORTED_ORDERS = (2, 256)
DEFAULT_POLY = 0x11B


def _clmul_reduce(a: int, b: int, poly: int) -> int:
    """Shift-and-add multiply, reducing by ``poly`` as we go."""
    result = 0
    while b:
        if b & 1:
            result ^= a
        b >>= 1
        a <<= 1
        if a & 0x100:
            a ^= poly
    return result


def _build_tables(poly: int) -> tuple[np.ndarray, np.ndarray]:
    # 2 is not a generator for every irreducible polynomial (e.g. 0x11B), so
    # search for one. A reducible polynomial has no element of order 255.
    for gen in range(2, 256):
        exp = np.zeros(512, dtype=np.uint8)
        log = np.zeros(256, dtype=np.int32)
        x = 1
        seen = 0
        for i in range(255):
            if i > 0 and x == 1:
                break
            exp[i] = x
            log[x] = i
            seen += 1
            x = _clmul_reduce(x, gen, poly)
        if seen == 255 and x == 1:
            exp[255:510] = exp[:255]
            exp[510:] = exp[:2]
            return exp, log
    raise DomainError(f"polynomial {poly:#x} is not irreducible over GF(2)")


@dataclass(frozen=True)
class FieldSpec:
    """The finite field GF(q), q in {2, 256}.

    ``poly`` is the reduction polynomial as a bit mask; it is ignored for q=2.
    Lookup tables are built at construction and are read-only afterwards, so a
    single instance can be shared between worker threads.
    """

    q: int = 256
    poly: int = DEFAULT_POLY
    exp: np.ndarray = field(init=False, repr=False, compare=False)
    log: np.ndarray = field(init=False, repr=False, compare=False)
    inv: np.ndarray = field(init=False, repr=False, compare=False)
    mul_table: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.q not in SUPPORTED_ORDERS:
            raise DomainError(f"unsupported field order q={self.q}; expected 2 or 256")
        if self.q == 2:
            exp = np.array([1, 1], dtype=np.uint8)
            log = np.zeros(2, dtype=np.int32)
            inv = np.array([0, 1], dtype=np.uint8)
            mul = np.array([[0, 0], [0, 1]], dtype=np.uint8)
        else:
            if not 0x100 <= self.poly <= 0x1FF:
                raise DomainError(f"reduction polynomial {self.poly:#x} must have degree 8")
            exp, log = _build_tables(self.poly)
            inv = np.zeros(256, dtype=np.uint8)
            inv[1:] = exp[(255 - log[1:]) % 255]
            nz = np.arange(1, 256)
            mul = np.zeros((256, 256), dtype=np.uint8)
            mul[1:, 1:] = exp[log[nz][:, None] + log[nz][None, :]]
        for arr in (exp, log, inv, mul):
            arr.setflags(write=False)
        object.__setattr__(self, "exp", exp)
        object.__setattr__(self, "log", log)
        object.__setattr__(self, "inv", inv)
        object.__setattr__(self, "mul_table", mul)

    def check(self, *elements: int) -> None:
        for a in elements:
            if not 0 <= int(a) < self.q:
                raise DomainError(f"element {a} is not in GF({self.q})")

    def check_array(self, arr: np.ndarray) -> None:
        arr = np.asarray(arr)
        if arr.size and (arr.min() < 0 or arr.max() >= self.q):
            raise DomainError(f"array holds values outside GF({self.q})")

    def scale(self, c: int, vec: np.ndarray) -> np.ndarray:
        """``c * vec`` elementwise."""
        if c == 0:
            return np.zeros_like(vec)
        if c == 1:
            return vec.copy()
        return self.mul_table[c][vec]

    def combine(self, coeffs: np.ndarray, rows: np.ndarray) -> np.ndarray:
        """Linear combination ``sum_k coeffs[k] * rows[k]``."""
        if self.q == 2:
            terms = rows & coeffs[:, None]
        else:
            terms = self.mul_table[coeffs[:, None], rows]
        if terms.shape[0] == 0:
            return np.zeros(rows.shape[1:], dtype=np.uint8)
        return np.bitwise_xor.reduce(terms, axis=0)


def gf_add(spec: FieldSpec, a: int, b: int) -> int:
    spec.check(a, b)
    return int(a) ^ int(b)


def gf_mul(spec: FieldSpec, a: int, b: int) -> int:
    spec.check(a, b)
    if a == 0 or b == 0:
        return 0
    if spec.q == 2:
        return 1
    return int(spec.exp[spec.log[a] + spec.log[b]])


def gf_inv(spec: FieldSpec, a: int) -> int:
    spec.check(a)
    if a == 0:
        raise ZeroDivisionError("0 has no multiplicative inverse")
    return int(spec.inv[a])


def as_matrix(spec: FieldSpec, m) -> np.ndarray:
    """Validate ``m`` as a 2-D matrix over ``spec`` and return it as uint8."""
    arr = np.asarray(m)
    if arr.ndim != 2:
        raise DomainError(f"expected a 2-D matrix, got shape {arr.shape}")
    if arr.size and (arr.min() < 0 or arr.max() >= spec.q):
        raise DomainError(f"matrix holds values outside GF({spec.q})")
    return arr.astype(np.uint8)


def _rank_gf2(m: np.ndarray) -> int:
    # rows packed into Python ints; XOR basis keyed by leading bit
    basis: dict[int, int] = {}
    for row in m:
        v = int.from_bytes(np.packbits(row).tobytes(), "big") if row.size else 0
        while v:
            lead = v.bit_length() - 1
            if lead not in basis:
                basis[lead] = v
                break
            v ^= basis[lead]
    return len(basis)


def _rank_gf256(spec: FieldSpec, m: np.ndarray) -> int:
    work = m.copy()
    n_rows, n_cols = work.shape
    rank = 0
    for col in range(n_cols):
        if rank == n_rows:
            break
        nz = np.nonzero(work[rank:, col])[0]
        if nz.size == 0:
            continue
        p = rank + nz[0]
        if p != rank:
            work[[rank, p]] = work[[p, rank]]
        pivot = work[rank] if work[rank, col] == 1 else spec.scale(int(spec.inv[work[rank, col]]), work[rank])
        work[rank] = pivot
        below = rank + 1 + np.nonzero(work[rank + 1:, col])[0]
        if below.size:
            factors = work[below, col]
            work[below] ^= spec.mul_table[factors[:, None], pivot[None, :]]
        rank += 1
    return rank


def matrix_rank(spec: FieldSpec, m) -> int:
    """Rank of ``m`` over GF(q) by Gaussian elimination. ``m`` is not modified."""
    arr = as_matrix(spec, m)
    if arr.size == 0:
        return 0
    if spec.q == 2:
        return _rank_gf2(arr)
    return _rank_gf256(spec, arr)


def pack_rows(coeffs: np.ndarray) -> np.ndarray:
    """Pack 0/1 coefficient vectors (..., K) with K <= 64 into uint64, bit j = coeffs[..., j]."""
    k = coeffs.shape[-1]
    if k > 64:
        raise DomainError("bit packing supports at most 64 columns")
    weights = np.left_shift(np.uint64(1), np.arange(k, dtype=np.uint64))
    return (coeffs.astype(np.uint64) * weights).sum(axis=-1, dtype=np.uint64)


_GF256_DEFAULT: FieldSpec | None = None


def _gf256_tables() -> FieldSpec:
    global _GF256_DEFAULT
    if _GF256_DEFAULT is None:
        _GF256_DEFAULT = FieldSpec(256)
    return _GF256_DEFAULT


def batch_rank(spec: FieldSpec, coeffs: np.ndarray, received: np.ndarray | None = None) -> np.ndarray:
    """Ranks of a stack of matrices ``coeffs[t]`` restricted to rows with ``received[t, i]``.

    ``coeffs`` has shape (T, N, K). Rows that were not received are ignored.
    """
    from . import _kernels

    coeffs = np.ascontiguousarray(coeffs, dtype=np.uint8)
    n_trials, n_rows, k = coeffs.shape
    if received is None:
        received = np.ones((n_trials, n_rows), dtype=np.bool_)
    received = np.ascontiguousarray(received, dtype=np.bool_)
    if spec.q == 2 and k <= 64:
        return _kernels.rank_packed_gf2(pack_rows(coeffs), received, k)
    # GF(2) is a subfield of GF(2^8) and rank does not change under field
    # extension, so wide binary matrices can reuse the byte kernel.
    tables = spec if spec.q == 256 else _gf256_tables()
    return _kernels.rank_gf256(coeffs, received, tables.exp, tables.log)


def batch_rank_packed(rows: np.ndarray, received: np.ndarray, k: int) -> np.ndarray:
    """GF(2) ranks for rows already packed with :func:`pack_rows`."""
    from . import _kernels

    return _kernels.rank_packed_gf2(
        np.ascontiguousarray(rows, dtype=np.uint64), np.ascontiguousarray(received, dtype=np.bool_), k
    )
