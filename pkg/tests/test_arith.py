import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from momentlab.arith import (
    divisors, euler_phi, factorize, gcd_split, is_prime, mobius, mod_inverse,
    radical, unit_circle,
)
from momentlab.errors import NotInvertible
from oracles import naive_factor


@pytest.mark.parametrize("a, q, want", [(3, 7, 5), (1, 1, 0), (10, 17, 12), (-1, 9, 8)])
def test_mod_inverse_examples(a, q, want):
    assert mod_inverse(a, q) == want


def test_mod_inverse_not_invertible():
    with pytest.raises(NotInvertible):
        mod_inverse(2, 4)


@pytest.mark.parametrize("q", [2, 9, 30, 97, 128])
def test_mod_inverse_all_units(q):
    for a in range(1, q):
        if math.gcd(a, q) == 1:
            assert a * mod_inverse(a, q) % q == 1


@pytest.mark.parametrize("n, want", [(12, [(2, 2), (3, 1)]), (1, []), (97, [(97, 1)]),
                                     (2**10 * 3**4, [(2, 10), (3, 4)])])
def test_factorize_examples(n, want):
    assert factorize(n) == want


def test_factorize_recomposes_up_to_1e6():
    # Sieve-based smallest prime factor as an independent route.
    n_max = 10**6
    spf = list(range(n_max + 1))
    for p in range(2, int(n_max**0.5) + 1):
        if spf[p] == p:
            for k in range(p * p, n_max + 1, p):
                if spf[k] == k:
                    spf[k] = p
    for n in range(1, n_max + 1, 997):
        fac = factorize(n).factorization
        assert math.prod(p**e for p, e in fac) == n
        assert [p for p, _ in fac] == sorted(p for p, _ in fac)
        if n > 1:
            assert fac[0][0] == spf[n]


def test_factorize_large_semiprime():
    p, q = 1_000_003, 999_983
    assert factorize(p * q) == [(q, 1), (p, 1)]
    assert is_prime(p) and not is_prime(p * q)


@given(st.integers(1, 10**6))
def test_factorize_matches_naive(n):
    assert factorize(n) == naive_factor(n)


@pytest.mark.parametrize("q, d, u, v", [(12, 2, 3, 4), (35, 6, 35, 1), (18, 6, 1, 18)])
def test_gcd_split_examples(q, d, u, v):
    s = gcd_split(q, d)
    assert (s.u, s.v) == (u, v)


def test_gcd_split_v_tilde():
    assert gcd_split(18, 6).v_tilde == 3
    assert gcd_split(12, 6).v_tilde == 2
    assert gcd_split(35, 6).v_tilde is None


@settings(max_examples=400)
@given(st.integers(1, 10**4), st.integers(1, 10**4))
def test_gcd_split_invariants(q, d):
    s = gcd_split(q, d)
    assert s.u * s.v == q
    assert math.gcd(s.u, d) == 1
    assert radical(d) % radical(s.v) == 0


@pytest.mark.parametrize("x, want", [(0, 1), (0.5, -1), (0.25, 1j), (Fraction(3, 4), -1j),
                                     (Fraction(7, 2), -1), (3, 1)])
def test_unit_circle_examples(x, want):
    assert abs(unit_circle(x) - want) < 1e-15


@given(st.floats(-1e6, 1e6), st.floats(-1e6, 1e6))
def test_unit_circle_additive(x, y):
    # x + y is rounded in floating point; the tolerance covers that rounding.
    lhs = unit_circle(x) * unit_circle(y)
    err = 2 * math.pi * abs(Fraction(x + y) - (Fraction(x) + Fraction(y)))
    assert abs(lhs - unit_circle(x + y)) < 1e-12 + float(err)
    assert abs(abs(unit_circle(x)) - 1) < 1e-15


def test_unit_circle_large_rational_is_reduced():
    x = Fraction(10**15 + 1, 10**15)
    assert abs(unit_circle(x) - complex(math.cos(2e-15 * math.pi), math.sin(2e-15 * math.pi))) < 1e-20


@pytest.mark.parametrize("n", [1, 2, 12, 30, 97, 360])
def test_divisor_helpers(n):
    assert divisors(n) == [k for k in range(1, n + 1) if n % k == 0]
    assert euler_phi(n) == sum(1 for k in range(1, n + 1) if math.gcd(k, n) == 1)
    assert sum(mobius(k) for k in divisors(n)) == (1 if n == 1 else 0)
