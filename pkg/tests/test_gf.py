import itertools

import galois
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from zigzag_net import gf
from zigzag_net.errors import DivisionByZero, FieldMismatch, InvalidField
from zigzag_net.gf import FieldSpec, Matrix, field, rank, rref


GF256 = field()
GF7 = field(7)
GF257 = field(257)


def test_default_field_is_aes_gf256():
    assert GF256.spec == FieldSpec.binary(8, 0x11B)
    assert GF256.q == 256


def test_add_self_is_zero_char2():
    for a in range(256):
        assert GF256.add(a, a) == 0


def test_inv_one_is_one():
    assert GF256.inv(1) == 1
    assert gf.arith("inv", GF256.element(1)).value == 1


def test_gf7_mul_table_oracle():
    # exhaustive multiplication table of integers mod 7
    table = {(a, b): (a * b) % 7 for a in range(7) for b in range(7)}
    assert table[(3, 5)] == 1
    for (a, b), v in table.items():
        assert GF7.mul(a, b) == v
    assert GF7.inv(3) == 5
    assert gf.arith("mul", GF7.element(3), GF7.element(5)).value == 1


def test_gf256_matches_galois_tables():
    ref = galois.GF(2**8, irreducible_poly=0x11B)
    a = ref(np.arange(256))
    for b in (1, 2, 3, 0x53, 0xCA, 0xFF):
        expect = (a * ref(b)).tolist()
        assert [GF256.mul(x, b) for x in range(256)] == expect
    assert GF256.mul(0x53, 0xCA) == 1  # FIPS-197 worked inverse pair


@pytest.mark.parametrize("spec", [FieldSpec.binary(d) for d in range(1, 9)] + [FieldSpec.prime(p) for p in (2, 3, 7, 13)])
def test_field_axioms_exhaustive(spec):
    F = field(spec)
    els = range(F.q)
    for a in els:
        assert F.add(a, 0) == a
        assert F.mul(a, 1) == a
        assert F.add(a, F.neg(a)) == 0
        if a:
            assert F.mul(a, F.inv(a)) == 1
        for b in els:
            assert F.add(a, b) == F.add(b, a)
            assert F.mul(a, b) == F.mul(b, a)
            assert F.sub(F.add(a, b), b) == a
    if F.q <= 16:
        for a, b, c in itertools.product(els, repeat=3):
            assert F.mul(a, F.add(b, c)) == F.add(F.mul(a, b), F.mul(a, c))
            assert F.mul(F.mul(a, b), c) == F.mul(a, F.mul(b, c))


def test_exhaustive_inverse_gf256():
    for a in range(1, 256):
        assert GF256.mul(a, GF256.inv(a)) == 1


@pytest.mark.parametrize("degree", range(1, 17))
def test_default_polynomials_are_irreducible(degree):
    spec = FieldSpec.binary(degree)
    ref = galois.Poly.Int(spec.poly, field=galois.GF(2))
    assert ref.is_irreducible()
    assert gf.is_irreducible_gf2(spec.poly)


def test_gf2_16_builds_and_inverts():
    F = field("gf2^16")
    rng = np.random.default_rng(1)
    for a in rng.integers(1, 1 << 16, size=200):
        assert F.mul(int(a), F.inv(int(a))) == 1


def test_irreducibility_matches_galois_for_degree_4():
    for poly in range(16, 32):
        ref = galois.Poly.Int(poly, field=galois.GF(2)).is_irreducible()
        assert gf.is_irreducible_gf2(poly) == ref


def test_rejects_reducible_and_composite():
    with pytest.raises(InvalidField):
        field(FieldSpec.binary(8, 0x100))  # x^8
    with pytest.raises(InvalidField):
        field(FieldSpec.prime(15))
    with pytest.raises(InvalidField):
        field(FieldSpec.prime(65537 * 3))


def test_large_prime_field():
    F = field("m61")
    assert F.q == gf.MERSENNE61
    assert F.mul(F.inv(123456789), 123456789) == 1


def test_division_by_zero():
    with pytest.raises(DivisionByZero):
        GF7.inv(0)
    with pytest.raises(DivisionByZero):
        GF256.element(0).inverse()


def test_mixed_fields_rejected():
    with pytest.raises(FieldMismatch):
        GF7.element(1) + GF257.element(1)
    with pytest.raises(FieldMismatch):
        gf.arith("mul", GF7.element(2), field(11).element(2))


def test_element_range_checked():
    with pytest.raises(InvalidField):
        GF7.element(7)


def test_parse_field():
    assert gf.parse_field("gf7") == FieldSpec.prime(7)
    assert gf.parse_field("gf2^8") == FieldSpec.binary(8, 0x11B)
    assert gf.parse_field("gf2^8:0x11d") == FieldSpec.binary(8, 0x11D)
    assert gf.parse_field("prime:257") == FieldSpec.prime(257)


# rref / rank ---------------------------------------------------------------


def test_rref_identity():
    m = Matrix.identity(GF7, 3)
    r, piv = rref(m)
    assert r == m and piv == (0, 1, 2)


def test_rref_zero():
    m = Matrix.zeros(GF7, 2, 2)
    r, piv = rref(m)
    assert r == m and piv == ()


def test_rref_gf2_hand_example():
    F2 = field("gf2^1")
    m = Matrix.from_rows(F2, [[1, 1, 0], [1, 0, 1]])
    r, piv = rref(m)
    assert r.to_rows() == [[1, 0, 1], [0, 1, 1]]
    assert piv == (0, 1)


def test_rank_identity_and_repeated_rows():
    assert rank(Matrix.identity(GF257, 5)) == 5
    assert rank(Matrix.from_rows(GF257, [[3, 1, 4]] * 4)) == 1


def _det_cofactor(F, rows):
    n = len(rows)
    if n == 1:
        return rows[0][0]
    total = 0
    for j in range(n):
        minor = [r[:j] + r[j + 1:] for r in rows[1:]]
        term = F.mul(rows[0][j], _det_cofactor(F, minor))
        total = F.add(total, term) if j % 2 == 0 else F.sub(total, term)
    return total


def _rank_by_minors(F, rows):
    nr, nc = len(rows), len(rows[0])
    for k in range(min(nr, nc), 0, -1):
        for ri in itertools.combinations(range(nr), k):
            for ci in itertools.combinations(range(nc), k):
                if _det_cofactor(F, [[rows[i][j] for j in ci] for i in ri]):
                    return k
    return 0


@pytest.mark.parametrize("seed", range(20))
def test_rank_matches_determinant_oracle_gf257(seed):
    rng = np.random.default_rng(seed)
    n = 4
    rows = rng.integers(0, 257, size=(n, n)).tolist()
    if seed % 3 == 0:  # force a dependency sometimes
        rows[3] = [GF257.add(a, GF257.mul(5, b)) for a, b in zip(rows[0], rows[1])]
    m = Matrix.from_rows(GF257, rows)
    assert rank(m) == _rank_by_minors(GF257, rows)
    assert (rank(m) == 4) == (_det_cofactor(GF257, rows) != 0)


matrices = st.integers(1, 5).flatmap(
    lambda r: st.integers(1, 5).flatmap(
        lambda c: st.lists(st.lists(st.integers(0, 6), min_size=c, max_size=c), min_size=r, max_size=r)))


@settings(max_examples=150, deadline=None)
@given(matrices)
def test_rank_transpose_and_idempotence(rows):
    m = Matrix.from_rows(GF7, rows)
    assert rank(m) == rank(m.transpose())
    r, piv = rref(m)
    r2, piv2 = rref(r)
    assert r2 == r and piv2 == piv
    assert list(piv) == sorted(set(piv))
    ref = galois.GF(7)
    assert rank(m) == np.linalg.matrix_rank(ref(np.array(rows)))


@settings(max_examples=100, deadline=None)
@given(matrices)
def test_rref_preserves_row_space(rows):
    m = Matrix.from_rows(GF7, rows)
    r, piv = rref(m)
    stacked = Matrix.from_rows(GF7, rows + r.to_rows())
    assert rank(stacked) == rank(m) == len(piv)


def test_poly_matrix_rank_simple():
    F = GF7
    # [[1, 1], [1, D]] has determinant D - 1 != 0
    assert gf.poly_matrix_rank(F, [[[1], [1]], [[1], [0, 1]]]) == 2
    # [[1, D], [D, D^2]] is singular
    assert gf.poly_matrix_rank(F, [[[1], [0, 1]], [[0, 1], [0, 0, 1]]]) == 1
