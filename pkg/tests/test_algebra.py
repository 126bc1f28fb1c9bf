from __future__ import annotations

import math
from itertools import combinations

import pytest
from hypothesis import given, settings, strategies as st

from setpit.algebra import (
    DEFAULT_PRIME,
    ExactMatrix,
    FunctionField,
    PrimeField,
    PrimeFieldElement,
    RatFunc,
    UniPoly,
    binomial_vec,
    det,
    had_tensor,
    inverse,
    is_prime,
    is_strongly_full,
    kron,
    kron_all,
    nullspace_basis,
    poly_gcd,
    rank,
    solve,
)
from setpit.errors import SingularMatrix

F7 = PrimeField(7)
F101 = PrimeField(101)
FY = FunctionField(101)


def mat(rows, field=F7):
    return ExactMatrix(field, rows)


def small_matrix(m, n, p=7):
    return st.lists(
        st.lists(st.integers(0, p - 1), min_size=n, max_size=n), min_size=m, max_size=m
    ).map(lambda rows: mat(rows, PrimeField(p)))


def test_default_prime():
    assert is_prime(DEFAULT_PRIME)
    assert DEFAULT_PRIME.bit_length() == 61
    assert not is_prime(DEFAULT_PRIME + 2)
    assert [q for q in range(30) if is_prime(q)] == [2, 3, 5, 7, 11, 13, 17, 19, 23, 29]


def test_binomial_vec():
    assert binomial_vec((1, 1), (1, 0)) == 1
    assert binomial_vec((1,), (2,)) == 0
    # factorial formula: 2!/(1!1!) * 3!/(2!1!)
    expected = (math.factorial(2) // (math.factorial(1) * math.factorial(1))) * (
        math.factorial(3) // (math.factorial(2) * math.factorial(1))
    )
    assert expected == 6
    assert binomial_vec((2, 3), (1, 2), 7) == PrimeFieldElement(6, 7)


def test_prime_field_element_ops():
    a = PrimeFieldElement(2, 7)
    assert a.inverse() == 4
    assert a * 4 == 1
    assert (a - 5) == 4
    assert -a == 5
    assert a / 2 == 1
    with pytest.raises(ZeroDivisionError):
        PrimeFieldElement(0, 7).inverse()


def test_rank_examples():
    assert rank(ExactMatrix.identity(F7, range(3))) == 3
    assert rank(mat([[0, 0], [0, 0]])) == 0
    assert rank(mat([[1, 2], [2, 4]])) == 1


def test_det_inverse_nullspace_examples():
    assert det(ExactMatrix.identity(F7, range(2))) == 1
    pascal = mat([[1, 0, 0], [1, 1, 0], [1, 2, 1]], F101)
    assert det(pascal) == 1
    (v,) = nullspace_basis(mat([[1, 1]]))
    assert (v[0] + v[1]) % 7 == 0 and v[0] % 7 != 0
    with pytest.raises(SingularMatrix):
        inverse(mat([[1, 2], [2, 4]]))


def test_strongly_full_examples():
    assert is_strongly_full(mat([[1, 1]]))
    assert not is_strongly_full(mat([[0, 1]]))
    T = mat([[1, 0], [1, 1]], F101)
    Tp = inverse(T)
    row = Tp.submatrix([1], Tp.cols)
    assert [x % 101 for x in row.data[0]] == [100, 1]
    assert is_strongly_full(row)


def test_kron_and_had_tensor_examples():
    I2 = ExactMatrix.identity(F7, range(2))
    K = kron(I2, I2)
    assert K.data == ExactMatrix.identity(F7, range(4)).data
    a = mat([[1], [2]])
    b = mat([[3], [4]])
    assert had_tensor(a, b).data == ((3,), (1,))  # (3, 8) mod 7


@settings(max_examples=40, deadline=None)
@given(small_matrix(3, 3))
def test_inverse_roundtrip(M):
    """inverse(M) M = M inverse(M) = I whenever det(M) != 0."""
    if det(M) == 0:
        return
    Mi = inverse(M)
    I = ExactMatrix.identity(F7, range(3))
    assert (Mi @ M).data == I.data
    assert (M @ Mi).data == I.data


@settings(max_examples=40, deadline=None)
@given(small_matrix(3, 4))
def test_rank_matches_minors(M):
    """Rank equals the largest size of a nonzero minor (independent route)."""
    best = 0
    for r in range(1, 4):
        for rows in combinations(range(3), r):
            for cols in combinations(range(4), r):
                if det(M.submatrix(rows, cols)) != 0:
                    best = r
    assert rank(M) == best


@settings(max_examples=30, deadline=None)
@given(small_matrix(2, 3))
def test_strongly_full_matches_definition(M):
    direct = all(
        det(M.submatrix(M.rows, [c for c in M.cols if c != j])) != 0 for j in M.cols
    )
    assert is_strongly_full(M) == direct


@settings(max_examples=25, deadline=None)
@given(small_matrix(2, 2), small_matrix(2, 2), small_matrix(2, 2), small_matrix(2, 2))
def test_lemma_tensor_mixed_product(E1, E2, M1, M2):
    """(E1 (x) E2)(M1 (x) M2) = (E1 M1) (x) (E2 M2)."""
    assert (kron(E1, E2) @ kron(M1, M2)) == kron(E1 @ M1, E2 @ M2)


@settings(max_examples=25, deadline=None)
@given(small_matrix(2, 2), small_matrix(2, 2))
def test_lemma_tensor_inverse(M1, M2):
    """M1^{-1} (x) M2^{-1} = (M1 (x) M2)^{-1}."""
    if det(M1) == 0 or det(M2) == 0:
        return
    assert kron(inverse(M1), inverse(M2)) == inverse(kron(M1, M2))


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(0, 6), min_size=2, max_size=2), small_matrix(2, 3), small_matrix(3, 2))
def test_lemma_hadamard_scaling(v, M1, M2):
    """(v * M1) M2 = v * (M1 M2)."""
    assert (M1.scale_rows(v) @ M2) == (M1 @ M2).scale_rows(v)


@settings(max_examples=25, deadline=None)
@given(small_matrix(3, 2), small_matrix(3, 2), small_matrix(2, 2), small_matrix(2, 3))
def test_lemma_hadamard_tensor(Z1, Z2, M1, M2):
    """(Z1 M1) had (Z2 M2) = (Z1 had Z2)(M1 (x) M2)."""
    assert had_tensor(Z1 @ M1, Z2 @ M2) == had_tensor(Z1, Z2) @ kron(M1, M2)


def test_kron_all_labels():
    A = mat([[1, 2], [3, 4]])
    B = mat([[0, 1]])
    K = kron_all([A, B])
    assert K.rows == ((0, 0), (1, 0))
    assert K.cols == ((0, 0), (0, 1), (1, 0), (1, 1))
    assert K.data == kron(A, B).data


# --- polynomials and rational functions -------------------------------------

polys = st.lists(st.integers(0, 100), max_size=6).map(lambda c: UniPoly(c, 101))


@given(polys, polys, polys)
def test_unipoly_ring_laws(a, b, c):
    assert (a + b) * c == a * c + b * c
    assert a * b == b * a
    assert (a - a).is_zero()


@given(polys, polys)
def test_unipoly_division(a, b):
    if b.is_zero():
        return
    q, r = divmod(a, b)
    assert q * b + r == a
    assert r.degree < b.degree


def test_packed_multiplication_matches_schoolbook():
    import random

    rng = random.Random(3)
    p = DEFAULT_PRIME
    a = [rng.randrange(p) for _ in range(130)]
    b = [rng.randrange(p) for _ in range(77)]
    fast = UniPoly(a, p) * UniPoly(b, p)
    slow = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            slow[i + j] = (slow[i + j] + x * y) % p
    assert list(fast.coeffs) == slow


@given(polys, polys.filter(lambda q: not q.is_zero()))
def test_ratfunc_canonical(a, b):
    r = RatFunc(a, b)
    assert r.den.lc == 1
    assert poly_gcd(r.num, r.den).degree == 0 or r.num.is_zero()
    assert RatFunc(r.num, r.den) == r
    assert r * RatFunc(b) == RatFunc(a)


@given(polys, polys.filter(lambda q: not q.is_zero()), polys, polys.filter(lambda q: not q.is_zero()))
def test_ratfunc_field_laws(a, b, c, d):
    x, y = RatFunc(a, b), RatFunc(c, d)
    assert x + y == y + x
    assert (x + y) - y == x
    if not y.is_zero():
        assert (x / y) * y == x


def test_ratfunc_examples():
    p = 101
    one_plus_y = RatFunc(UniPoly([1, 1], p))
    inv = one_plus_y.inverse()
    assert inv.num == UniPoly([1], p) and inv.den == UniPoly([1, 1], p)
    assert RatFunc.y_power(-2, p) * RatFunc.y_power(3, p) == RatFunc.y_power(1, p)
    assert RatFunc(UniPoly([0, 2], p), UniPoly([0, 4], p)) == RatFunc.from_int(51, p)


def _exhaustive_rank(M):
    """Rank over F_p(y) as the maximum of evaluated ranks over all of F_p.

    Valid when p exceeds the degree of every minor (true for these sizes).
    """
    best = 0
    for y0 in range(M.field.p):
        try:
            E = M.evaluate(y0)
        except ZeroDivisionError:
            continue
        best = max(best, rank(E))
    return best


ratfuncs = st.tuples(
    st.lists(st.integers(0, 100), max_size=3), st.sampled_from([[1], [1, 1], [0, 1], [3, 0, 1]])
).map(lambda t: RatFunc(UniPoly(t[0], 101), UniPoly(t[1], 101)))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.lists(ratfuncs, min_size=4, max_size=4), min_size=2, max_size=2), st.integers(0, 100))
def test_symbolic_rank_bareiss_path(rows, c):
    """A dependent third row forces the fraction-free path; result matches the exhaustive oracle."""
    third = [x * c + y for x, y in zip(rows[0], rows[1])]
    M = ExactMatrix(FY, rows + [third])
    assert rank(M) == _exhaustive_rank(M)


@settings(max_examples=20, deadline=None)
@given(st.lists(st.lists(ratfuncs, min_size=3, max_size=3), min_size=3, max_size=3))
def test_symbolic_det_matches_evaluation(rows):
    M = ExactMatrix(FY, rows)
    d = det(M)
    for y0 in (2, 5, 17):
        try:
            E = M.evaluate(y0)
            expected = det(E)
            got = d(y0)
        except ZeroDivisionError:
            continue
        assert got == expected


def test_symbolic_inverse_and_solve():
    y = FY.y()
    M = ExactMatrix(FY, [[1, 0], [y, 1]])
    Mi = inverse(M)
    assert Mi.entry(1, 0) == -y
    x = solve(M, [1, 0])
    assert x[0] == FY.one and x[1] == -y
    assert solve(mat([[1, 1], [1, 1]]), [1, 2]) is None
