import math
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from momentlab.arith import euler_phi, factorize, mod_inverse, num_divisors, units
from momentlab.errors import BadFrequency, NonDivisible, PatternMismatch
from momentlab.expsums import (
    CharSumParams, C_bruteforce, C_factored, average_bound_report, diag_char_sum,
    diag_identity_value, full_C_decomposition_check, kloosterman, kloosterman_crt,
    local_factor_Cpj, local_factor_Cpj_bruteforce, offdiag_bruteforce_all_m,
    offdiag_char_sum_bruteforce, offdiag_char_sum_factored, ramanujan_bound_slack,
    ramanujan_sum, ramanujan_sum_direct, weil_check,
)
from oracles import naive_kloosterman, naive_offdiag, naive_ramanujan

# Frozen from the naive oracle: 2 + 2 cos(4 pi / 5).
S_1_1_5 = 0.3819660112501051


def test_kloosterman_examples():
    assert kloosterman(1, 1, 1).value == 1
    assert abs(kloosterman(1, 1, 5).value - S_1_1_5) < 1e-14
    assert kloosterman(1, 1, 5).exact


@pytest.mark.parametrize("q", [1, 2, 6, 12, 30, 49])
@pytest.mark.parametrize("n", [0, 1, 4, -3])
def test_kloosterman_zero_a_is_ramanujan(q, n):
    assert abs(kloosterman(0, n, q).value - ramanujan_sum(q, n).value) < 1e-10


@pytest.mark.parametrize("a, b, q", [(1, 1, 15), (1, 1, 7), (2, 3, 12), (5, 7, 360), (0, 0, 8)])
def test_kloosterman_crt_examples(a, b, q):
    assert abs(kloosterman_crt(a, b, q).value - naive_kloosterman(a, b, q)) < 1e-10
    assert abs(kloosterman(a, b, q).value - naive_kloosterman(a, b, q)) < 1e-10


@settings(max_examples=200)
@given(st.integers(-10**6, 10**6), st.integers(-10**6, 10**6), st.integers(1, 300))
def test_kloosterman_multiplicativity(a, b, q):
    assert abs(kloosterman_crt(a, b, q).value - kloosterman(a, b, q).value) < 1e-9


@pytest.mark.parametrize("q, n, want", [(5, 1, -1), (4, 2, -2), (12, 0, 4), (1, 7, 1), (30, 6, -2)])
def test_ramanujan_examples(q, n, want):
    assert ramanujan_sum(q, n).value == want
    assert abs(naive_ramanujan(q, n) - want) < 1e-10


@given(st.integers(1, 200), st.integers(-500, 500))
def test_ramanujan_formula_vs_character_sum(q, n):
    assert ramanujan_sum(q, n).value == ramanujan_sum_direct(q, n).value


def test_ramanujan_gcd_bound():
    # Hoelder's formula c_q(a) = mu(q/g) phi(q) / phi(q/g) with g = gcd(q, a)
    # gives |c_q(a)| <= g, so the gcd bound holds without divisor slack.
    worst = 0.0
    for q in range(1, 120):
        for a in range(0, 120):
            val, g, tau = ramanujan_bound_slack(q, a)
            mu = 0 if any(e > 1 for _, e in factorize(q // g)) else (-1) ** len(factorize(q // g))
            assert ramanujan_sum(q, a).value == mu * euler_phi(q) // euler_phi(q // g)
            assert val <= g
            worst = max(worst, val / g)
    assert worst == 1.0


@pytest.mark.parametrize("q1, q2, h1, h2, want", [(2, 3, 1, 1, 0), (3, 3, 1, 1, 18), (1, 1, 1, 1, 1)])
def test_diag_examples(q1, q2, h1, h2, want):
    assert abs(diag_char_sum(q1, q2, h1, h2).value - want) < 1e-9


def test_diag_bad_frequency():
    with pytest.raises(BadFrequency):
        diag_char_sum(4, 4, 2, 1)


@pytest.mark.parametrize("q1", [1, 4, 9, 12])
@pytest.mark.parametrize("q2", [1, 4, 6, 12])
def test_diag_identity_grid(q1, q2):
    for h1 in units(q1):
        for h2 in units(q2):
            h1, h2 = int(h1) or 1, int(h2) or 1
            got = diag_char_sum(q1, q2, h1, h2).value
            want = diag_identity_value(q1, q2, h1, h2).value
            assert abs(got - want) < 1e-6 * q1 * q1 * q2


def test_offdiag_examples():
    assert abs(offdiag_char_sum_bruteforce(CharSumParams(4, 6, 1, 1, m=1)).value) < 1e-9
    assert abs(offdiag_char_sum_bruteforce(CharSumParams(1, 1, m=17)).value - 1) < 1e-12
    for q1, q2 in [(3, 5), (4, 6), (6, 6)]:
        p = CharSumParams(q1, q2, 1, 1, m=0)
        assert abs(offdiag_char_sum_bruteforce(p).value - diag_char_sum(q1, q2, 1, 1).value) < 1e-9


@pytest.mark.parametrize("q1, q2, h1, h2, m", [(3, 5, 1, 1, 1), (5, 5, 2, 3, 5), (4, 6, 3, 5, 2),
                                               (1, 7, 1, 2, 3), (8, 12, 3, 5, 4)])
def test_offdiag_bruteforce_vs_naive(q1, q2, h1, h2, m):
    p = CharSumParams(q1, q2, h1, h2, m=m)
    assert abs(offdiag_char_sum_bruteforce(p).value - naive_offdiag(q1, q2, h1, h2, m)) < 1e-8


@pytest.mark.parametrize("form", ["direct", "reciprocity"])
@pytest.mark.parametrize("q1, q2, h1, h2, m", [(3, 5, 1, 1, 1), (7, 7, 1, 1, 7), (1, 9, 1, 2, 4),
                                               (12, 18, 5, 7, 6), (9, 6, 2, 1, -3)])
def test_offdiag_factored_examples(form, q1, q2, h1, h2, m):
    p = CharSumParams(q1, q2, h1, h2, m=m)
    f = offdiag_char_sum_factored(p, form).value
    assert abs(f - offdiag_char_sum_bruteforce(p).value) < 1e-9 * q1 * q2


def test_offdiag_nondivisible():
    with pytest.raises(NonDivisible):
        offdiag_char_sum_factored(CharSumParams(4, 6, 1, 1, m=1))


def test_offdiag_vanishing_exhaustive():
    for q1 in range(1, 25):
        for q2 in range(1, 25):
            d = math.gcd(q1, q2)
            if d == 1:
                continue
            vals = offdiag_bruteforce_all_m(q1, q2, 1, 1)
            for m in range(q1 * q2):
                if m % d:
                    assert abs(vals[m]) < 1e-8 * q1 * q2


def _c_params():
    return CharSumParams(q1=4, q2=6, h1=1, h2=1, h2p=1, m=2, q2p=10)


def test_local_factor_example_p2():
    p = _c_params()
    got = local_factor_Cpj(p, (2, (1, 1, 0, 0)), 2).value
    assert abs(got - local_factor_Cpj_bruteforce(p, 2, 2).value) < 1e-10
    assert abs(local_factor_Cpj(p, 2, 1).value) == 0  # 2 does not divide ut1


def test_local_factor_pattern_mismatch():
    p = _c_params()
    with pytest.raises(PatternMismatch):
        local_factor_Cpj(p, (2, (1, 1, 1, 0)), 2)
    # gcd(q1, q2p) > d puts the prime in both vt1 and vt2p
    with pytest.raises(PatternMismatch):
        local_factor_Cpj(CharSumParams(4, 6, m=2, q2p=8), 2, 0)


def test_local_factor_degenerate_exponents_is_kloosterman_sum():
    # a = 1, b = c = dd = 0: the local sum collapses to sums of S(.,.;p).
    p = CharSumParams(q1=3, q2=3 * 2, h1=1, h2=1, h2p=1, m=3, q2p=3 * 5)
    for ut in range(4):
        got = local_factor_Cpj(p, 3, ut).value
        assert abs(got - local_factor_Cpj_bruteforce(p, 3, ut).value) < 1e-10


def test_C_all_moduli_one():
    p = CharSumParams(1, 1, m=1)
    for ut in range(3):
        assert abs(C_bruteforce(p, ut).value - 1) < 1e-14
        assert abs(C_factored(p, ut)[0].value - 1) < 1e-14


def test_C_coprime_case_has_only_two_factors():
    p = CharSumParams(q1=1, q2=7, h1=3, h2=5, h2p=2, m=11, q2p=9)
    for ut in range(6):
        val, parts = C_factored(p, ut)
        assert set(parts) == {"mh1", "h2h2p"}
        assert abs(val.value - C_bruteforce(p, ut).value) < 1e-9


def test_C_support_law_example():
    # vt1 = 2 and ut1 = 1: the dual sum vanishes.
    p = CharSumParams(q1=4, q2=6, m=2, q2p=10)
    assert p.v1t == 2
    assert abs(C_bruteforce(p, 1).value) < 1e-10


_C_GRID = [
    (2, 2, 1, 1, 3, 5, 1, 1, 1, 1),
    (3, 1, 3, 1, 1, 1, 7, 1, 1, 1),
    (2, 1, 1, 2, 1, 3, 1, 5, 1, 1),
    (6, 1, 1, 1, 5, 7, 1, 1, 1, 1),
    (4, 1, 1, 1, 3, 3, 1, 1, 5, 7),
    (5, 1, 1, 5, 1, 1, 3, 1, 1, 1),
    (6, 2, 3, 1, 5, 1, 1, 1, 7, 7),
]


@pytest.mark.parametrize("d, vt1, vt2, vt2p, u2, u2p, mt, h1, h2, h2p", _C_GRID)
def test_C_decomposition_grid(d, vt1, vt2, vt2p, u2, u2p, mt, h1, h2, h2p):
    p = CharSumParams(q1=d * vt1, q2=u2 * d * vt2, h1=h1, h2=h2, h2p=h2p, m=d * mt,
                      q2p=u2p * d * vt2p)
    assert (p.v1t, p.v2t, p.v2pt) == (vt1, vt2, vt2p)
    for ut in range(0, 13):
        r = full_C_decomposition_check(p, ut)
        assert r.equal, (ut, r.brute, r.factored)
        assert r.support_ok


@pytest.mark.parametrize("a, b, q", [(1, 1, 5), (0, 0, 12), (1, 1, 1), (3, 9, 27), (5, 10, 128)])
def test_weil(a, b, q):
    ok, ratio = weil_check(a, b, q)
    assert ok
    if (a, b, q) == (1, 1, 5):
        assert abs(ratio - S_1_1_5 / (2 * math.sqrt(5))) < 1e-12
        assert abs(ratio - 0.085) < 1e-3
    if (a, b, q) == (1, 1, 1):
        assert ratio == 1


@settings(max_examples=100)
@given(st.integers(0, 10**4), st.integers(0, 10**4), st.integers(1, 400))
def test_weil_property(a, b, q):
    assert weil_check(a, b, q).ok


def test_average_bound_report():
    rep = average_bound_report([CharSumParams(1, 1, m=1)], U=16)
    assert rep.rows[0]["sum_abs"] == pytest.approx(16)
    assert rep.max_ratio == pytest.approx(1.0)
    grid = [CharSumParams(1, 7, 3, 5, 2, m=11, q2p=9), CharSumParams(3, 6, m=3, q2p=15)]
    rep = average_bound_report(grid, U=12)
    assert all(np.isfinite(r["ratio"]) for r in rep.rows)
    brute = average_bound_report(grid, U=12, use_bruteforce=True)
    for r1, r2 in zip(rep.rows, brute.rows):
        assert r1["sum_abs"] == pytest.approx(r2["sum_abs"], abs=1e-8)
