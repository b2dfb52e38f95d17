from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from hecketree.padic import (
    INF,
    PadicContext,
    PadicMatrix,
    PadicScalar,
    PrecisionError,
    congruence_level,
    in_integral_group,
    matrix_ops,
    reduce_mod,
    scalar_ops,
    valuation,
    vp_fraction,
)

primes = st.sampled_from([2, 3, 5])
nonzero = st.fractions(max_denominator=200).filter(lambda x: x != 0)


def S(x, p=2, N=12):
    return PadicScalar.from_rational(x, p, N)


def test_mul_p_p():
    a = scalar_ops(S(2), S(2), "mul")
    assert a.to_fraction() == 4 and valuation(a) == 2


def test_inverse_of_one_plus_p():
    for p in (2, 3, 5):
        x = S(1 + p, p)
        assert scalar_ops(scalar_ops(x, None, "inv"), x, "mul") == 1


def test_truncated_cancellation_is_flagged():
    p, N = 2, 8
    a = PadicScalar.truncated(p**N - 1, p, N)
    s = scalar_ops(S(1, p, N), a, "add")
    assert s.is_zero()
    assert s.valuation_at_least(N)
    with pytest.raises(PrecisionError):
        s.valuation()
    # the same sum at higher precision, computed on integers mod p^(N+2)
    assert (1 + (p**N - 1)) % p ** (N + 2) == p**N


def test_zero_valuation_and_inverse():
    assert valuation(PadicScalar.zero(3)) == INF
    with pytest.raises(ZeroDivisionError):
        PadicScalar.zero(3).inverse()


def test_unknown_zero_cannot_be_inverted():
    with pytest.raises(PrecisionError):
        PadicScalar.big_oh(2, 5).inverse()


@given(primes, nonzero, st.integers(0, 6))
def test_valuation_of_p_power_times_unit(p, u, k):
    u = u / Fraction(p) ** int(valuation(S(u, p)))
    assert valuation(S(u * p**k, p)) == k


@given(primes, nonzero, nonzero)
def test_discrete_valuation_axioms(p, a, b):
    x, y = S(a, p), S(b, p)
    assert valuation(x * y) == valuation(x) + valuation(y)
    if a + b != 0:
        vs = valuation(x + y)
        assert vs >= min(valuation(x), valuation(y))
        if valuation(x) != valuation(y):
            assert vs == min(valuation(x), valuation(y))


@given(primes, st.integers(-10**6, 10**6).filter(bool), st.integers(-10**6, 10**6).filter(bool))
def test_truncated_arithmetic_matches_integers(p, a, b):
    N = 6
    x, y = PadicScalar.truncated(a, p, N), PadicScalar.truncated(b, p, N)
    for got, want in ((x * y, a * b), (x + y, a + b)):
        diff = got.to_fraction() - want
        assert diff == 0 or vp_fraction(diff, p) >= got.absprec


def test_det_h():
    for p in (2, 3, 5):
        ctx = PadicContext(p)
        assert ctx.h().det() == -p
        assert ctx.h(3).det() == p


def test_inverse_identity_and_product():
    ctx = PadicContext(3)
    one = ctx.identity()
    assert matrix_ops(one, None, "inv").equals(one)
    A = ctx.matrix([[2, 1], [7, 4]])
    assert (A @ A.inverse()).equals(one)


@given(primes, st.lists(st.integers(-20, 20), min_size=8, max_size=8))
def test_det_multiplicative(p, xs):
    ctx = PadicContext(p)
    A = ctx.matrix([xs[0:2], xs[2:4]])
    B = ctx.matrix([xs[4:6], xs[6:8]])
    assert matrix_ops(A @ B, None, "det") == A.det() * B.det()


def test_integral_group_membership():
    ctx = PadicContext(2)
    for m in range(1, 8):
        assert in_integral_group(ctx.identity(), ("K", m))
    assert not in_integral_group(ctx.h(), "SL")
    u = Fraction(1 + 2**2)
    D = ctx.diag(u, 1 / u)
    assert in_integral_group(D, ("K", 2)) and not in_integral_group(D, ("K", 3))
    assert reduce_mod(D, 2) == ((1, 0), (0, 1))
    assert reduce_mod(D, 3) != ((1, 0), (0, 1))
    assert congruence_level(D) == 2


def test_level_needs_precision():
    A = PadicMatrix.from_rows([[PadicScalar.truncated(1, 2, 4), 0], [0, PadicScalar.truncated(1, 2, 4)]], 2, 4)
    with pytest.raises(PrecisionError):
        in_integral_group(A, ("K", 6))


def test_reduce_identity_and_sl2_f2_count():
    ctx = PadicContext(2)
    assert reduce_mod(ctx.identity(), 3) == ((1, 0), (0, 1))
    import itertools

    count = sum(1 for a, b, c, d in itertools.product(range(2), repeat=4) if (a * d - b * c) % 2 == 1)
    assert count == 6


@given(primes, st.lists(st.integers(-30, 30), min_size=8, max_size=8), st.integers(1, 4))
def test_reduce_mod_multiplicative(p, xs, m):
    ctx = PadicContext(p)
    A = ctx.matrix([xs[0:2], xs[2:4]])
    B = ctx.matrix([xs[4:6], xs[6:8]])
    M = p**m
    ra, rb = reduce_mod(A, m), reduce_mod(B, m)
    prod = tuple(tuple(sum(ra[i][k] * rb[k][j] for k in range(2)) % M for j in range(2)) for i in range(2))
    assert reduce_mod(A @ B, m) == prod


def _random_km(rng, p, m):
    x, y, z = (rng.randrange(-9, 10) * p**m for _ in range(3))
    a = 1 + z
    return [[Fraction(a), Fraction(x)], [Fraction(y), Fraction(1 + x * y, a)]]


def test_congruence_subgroups_nested(rng):
    ctx = PadicContext(3, 12)
    for _ in range(100):
        m = rng.randrange(1, 4)
        A = ctx.matrix(_random_km(rng, 3, m))
        B = ctx.matrix(_random_km(rng, 3, m))
        assert in_integral_group(A, ("K", m)) and in_integral_group(A, "SL")
        assert in_integral_group(A @ B, ("K", m))
        assert in_integral_group(A.inverse(), ("K", m))
        if in_integral_group(A, ("K", m + 1)):
            assert in_integral_group(A, ("K", m))


def test_context_rejects_composite():
    with pytest.raises(ValueError):
        PadicContext(6)
