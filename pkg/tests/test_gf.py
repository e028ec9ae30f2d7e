import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rlnc_offload.analytic import p_full_rank
from rlnc_offload.errors import DomainError
from rlnc_offload.gf import FieldSpec, batch_rank, gf_add, gf_inv, gf_mul, matrix_rank

F2 = FieldSpec(2)
F256 = FieldSpec(256)


def slow_mul(a, b, poly=0x11B):
    """Carry-less multiply then reduce; shares no code with the tables."""
    r = 0
    for i in range(8):
        if (b >> i) & 1:
            r ^= a << i
    for i in range(15, 7, -1):
        if (r >> i) & 1:
            r ^= poly << (i - 8)
    return r


def poly_divmod(a, b):
    q = 0
    while a and a.bit_length() >= b.bit_length():
        s = a.bit_length() - b.bit_length()
        q ^= 1 << s
        a ^= b << s
    return q, a


def euclid_inverse(a, poly=0x11B):
    """Extended Euclid over GF(2)[x]."""
    r0, r1, s0, s1 = poly, a, 0, 1
    while r1:
        quo, rem = poly_divmod(r0, r1)
        r0, r1 = r1, rem
        prod = 0
        for i in range(quo.bit_length()):
            if (quo >> i) & 1:
                prod ^= s1 << i
        s0, s1 = s1, s0 ^ prod
    assert r0 == 1
    return poly_divmod(s0, poly)[1]


def naive_rank(m, mul, inv):
    """Textbook elimination on lists, using the slow multiply."""
    rows = [list(map(int, r)) for r in m]
    rank, ncols = 0, len(rows[0]) if rows else 0
    for c in range(ncols):
        piv = next((i for i in range(rank, len(rows)) if rows[i][c]), None)
        if piv is None:
            continue
        rows[rank], rows[piv] = rows[piv], rows[rank]
        f = inv(rows[rank][c])
        rows[rank] = [mul(f, x) for x in rows[rank]]
        for i in range(len(rows)):
            if i != rank and rows[i][c]:
                g = rows[i][c]
                rows[i] = [x ^ mul(g, y) for x, y in zip(rows[i], rows[rank])]
        rank += 1
    return rank


def test_add_examples():
    assert gf_add(F2, 1, 1) == 0
    assert gf_add(F256, 0x57, 0x83) == 0x57 ^ 0x83 == 0xD4
    for a in range(256):
        assert gf_add(F256, a, 0) == a


def test_mul_examples():
    assert gf_mul(F2, 1, 1) == 1
    assert gf_mul(F2, 1, 0) == 0
    assert gf_mul(F256, 0x02, 0x87) == slow_mul(0x02, 0x87) == 0x15
    assert gf_mul(F256, 0x53, 0xCA) == 0x01
    assert euclid_inverse(0x53) == 0xCA


def test_inv_examples():
    assert gf_inv(F2, 1) == 1
    assert gf_inv(F256, 0x01) == 0x01
    assert gf_inv(F256, 0x53) == 0xCA


def test_mul_matches_slow_reference_on_all_pairs():
    a, b = np.meshgrid(np.arange(256), np.arange(256), indexing="ij")
    ref = np.vectorize(slow_mul)(a, b)
    assert np.array_equal(F256.mul_table, ref)
    assert all(gf_mul(F256, x, y) == ref[x, y] for x, y in [(0, 7), (255, 255), (0x1B, 0x80)])


def test_inverse_matches_extended_euclid():
    for a in range(1, 256):
        assert gf_inv(F256, a) == euclid_inverse(a)


def test_gf2_axioms_exhaustive():
    for a, b, c in itertools.product(range(2), repeat=3):
        assert gf_mul(F2, a, gf_mul(F2, b, c)) == gf_mul(F2, gf_mul(F2, a, b), c)
        assert gf_mul(F2, a, gf_add(F2, b, c)) == gf_add(F2, gf_mul(F2, a, b), gf_mul(F2, a, c))
        assert gf_add(F2, a, b) == gf_add(F2, b, a)
        assert gf_mul(F2, a, b) == gf_mul(F2, b, a)


def test_gf256_axioms_random_triples():
    rng = np.random.default_rng(7)
    m = F256.mul_table
    a, b, c = rng.integers(0, 256, size=(3, 20_000))
    assert np.array_equal(m[a, m[b, c]], m[m[a, b], c])
    assert np.array_equal(m[a, b], m[b, a])
    assert np.array_equal(m[a, b ^ c], m[a, b] ^ m[a, c])
    assert np.array_equal(m[a, 1], a)
    nz = a[a != 0]
    assert np.all(m[nz, F256.inv[nz]] == 1)


def test_other_polynomial():
    # x^8 + x^4 + x^3 + x^2 + 1 is primitive; 2 generates the group
    f = FieldSpec(256, 0x11D)
    assert gf_mul(f, 2, 0x80) == 0x1D
    assert all(gf_mul(f, a, gf_inv(f, a)) == 1 for a in range(1, 256))


@pytest.mark.parametrize("q,poly", [(3, 0x11B), (16, 0x11B), (65536, 0x11B), (256, 0x1B), (256, 0x201)])
def test_rejects_bad_fields(q, poly):
    with pytest.raises(DomainError):
        FieldSpec(q, poly)


def test_rejects_reducible_polynomial():
    with pytest.raises(DomainError):
        FieldSpec(256, 0x100)  # x^8


def test_tables_are_immutable():
    with pytest.raises(ValueError):
        F256.exp[0] = 5


def test_domain_errors():
    with pytest.raises(DomainError):
        gf_add(F2, 2, 0)
    with pytest.raises(DomainError):
        gf_mul(F256, 256, 1)
    with pytest.raises(ZeroDivisionError):
        gf_inv(F256, 0)


def test_rank_examples():
    assert matrix_rank(F2, np.eye(7, dtype=np.uint8)) == 7
    assert matrix_rank(F256, np.eye(12, dtype=np.uint8)) == 12
    m = np.array([[1, 1, 0], [0, 1, 1], [1, 0, 1]], dtype=np.uint8)
    # enumerate all 8 combinations of the rows: span has 4 elements -> rank 2
    span = {tuple(np.bitwise_xor.reduce(m[list(s)], axis=0)) if s else (0, 0, 0)
            for r in range(4) for s in itertools.combinations(range(3), r)}
    assert len(span) == 4
    assert matrix_rank(F2, m) == 2


def test_rank_does_not_mutate():
    m = np.array([[3, 7], [9, 1]], dtype=np.uint8)
    before = m.copy()
    matrix_rank(F256, m)
    assert np.array_equal(m, before)


def test_rank_rejects_out_of_field():
    with pytest.raises(DomainError):
        matrix_rank(F2, [[0, 2]])
    with pytest.raises(DomainError):
        matrix_rank(F256, [1, 2, 3])


@given(st.integers(1, 12), st.integers(1, 12), st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_rank_duplicate_rows(rows, cols, seed):
    rng = np.random.default_rng(seed)
    for f in (F2, F256):
        m = rng.integers(0, f.q, size=(rows, cols), dtype=np.uint8)
        assert matrix_rank(f, np.vstack([m, m])) == matrix_rank(f, m)


@pytest.mark.parametrize("q", [2, 256])
def test_rank_matches_naive_elimination(q):
    f = FieldSpec(q)
    if q == 2:
        mul, inv = (lambda a, b: a & b), (lambda a: 1)
    else:
        mul, inv = slow_mul, euclid_inverse
    rng = np.random.default_rng(q)
    for _ in range(150):
        r, c = rng.integers(1, 13, size=2)
        m = rng.integers(0, q, size=(r, c), dtype=np.uint8)
        if rng.random() < 0.3:
            # force dependencies by mixing existing rows
            m[-1] = m[0] ^ (m[1 % r] if q == 2 else f.mul_table[rng.integers(1, q), m[1 % r]])
        expected = naive_rank(m, mul, inv)
        assert matrix_rank(f, m) == expected
        assert batch_rank(f, m[None])[0] == expected


def test_batch_rank_respects_received_mask():
    rng = np.random.default_rng(3)
    for f in (F2, F256):
        coeffs = rng.integers(0, f.q, size=(50, 9, 6), dtype=np.uint8)
        mask = rng.random((50, 9)) < 0.6
        got = batch_rank(f, coeffs, mask)
        for t in range(50):
            assert got[t] == matrix_rank(f, coeffs[t][mask[t]])


def test_wide_gf2_uses_subfield_kernel():
    rng = np.random.default_rng(4)
    coeffs = rng.integers(0, 2, size=(20, 70, 66), dtype=np.uint8)
    got = batch_rank(F2, coeffs)
    assert list(got) == [matrix_rank(F2, c) for c in coeffs]


@pytest.mark.parametrize("n,K,q", [(10, 10, 2), (12, 10, 2), (10, 10, 256), (8, 6, 2)])
def test_random_matrix_full_rank_frequency(n, K, q):
    trials = 100_000
    rng = np.random.default_rng(1000 + n + K + q)
    coeffs = rng.integers(0, q, size=(trials, n, K), dtype=np.uint8)
    freq = np.mean(batch_rank(FieldSpec(q), coeffs) == K)
    p = p_full_rank(n, K, q)
    assert abs(freq - p) <= 3 * np.sqrt(p * (1 - p) / trials)
