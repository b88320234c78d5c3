"""Kloosterman, Ramanujan and composite character sums.

Every sum is available in a brute-force form (direct enumeration of residues,
accumulated with compensated summation) and, where a factorization exists, in
a factored form built from the Chinese remainder theorem. Tests compare the
two routes.

Notation for the composite sums: ``d = gcd(q1, q2)``, ``q_i = u_i * v_i``
with ``v_i`` the part of ``q_i`` supported on primes of ``d``,
``vt_i = v_i / d`` and ``mt = m / d``. Primed quantities belong to a second
modulus ``q2p`` sharing ``q1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Iterable, Sequence

import numpy as np

from .arith import (
    divisors,
    euler_phi,
    factorize,
    gcd_split,
    mobius,
    mod_inverse,
    num_divisors,
    root_table,
    units,
)
from .errors import BadFrequency, BudgetExceeded, NonDivisible, PatternMismatch

__all__ = [
    "SumValue",
    "CharSumParams",
    "kloosterman",
    "kloosterman_crt",
    "ramanujan_sum",
    "ramanujan_sum_direct",
    "diag_char_sum",
    "diag_identity_value",
    "offdiag_char_sum_bruteforce",
    "offdiag_char_sum_factored",
    "C_bruteforce",
    "C_factored",
    "C_factor_mh1",
    "C_factor_h2h2p",
    "local_exponents",
    "local_factor_Cpj",
    "local_factor_Cpj_bruteforce",
    "full_C_decomposition_check",
    "weil_check",
    "average_bound_report",
    "BRUTE_BUDGET",
]

BRUTE_BUDGET = 10**7
_REAL_TOL = 1e-9


@dataclass(frozen=True)
class SumValue:
    value: complex
    exact: bool = True

    def __complex__(self):
        return complex(self.value)

    def __abs__(self):
        return abs(self.value)

    @property
    def real(self) -> float:
        return self.value.real

    @property
    def imag(self) -> float:
        return self.value.imag


def _csum(z: np.ndarray) -> complex:
    """Compensated sum of a complex array."""
    z = np.asarray(z, dtype=np.complex128).ravel()
    if z.size == 0:
        return 0j
    return complex(math.fsum(z.real), math.fsum(z.imag))


def _roots_sum(residues: np.ndarray, q: int) -> complex:
    """Sum of e(k/q) over the integer array ``residues``."""
    if q == 1:
        return complex(np.asarray(residues).size)
    counts = np.bincount(np.asarray(residues, dtype=np.int64) % q, minlength=q)
    return _csum(counts * root_table(q))


def _check_budget(terms: int, what: str) -> None:
    if terms > BRUTE_BUDGET:
        raise BudgetExceeded(f"{what} needs {terms} terms, budget is {BRUTE_BUDGET}")


def _inv(a: int, q: int) -> int:
    """Inverse of a mod q, with q = 1 mapped to 0. Assumes coprimality."""
    return 0 if q == 1 else pow(a % q, -1, q)


def _inv_array(x: np.ndarray, q: int) -> np.ndarray:
    if q == 1:
        return np.zeros_like(x)
    return np.array([pow(int(v), -1, q) for v in x], dtype=np.int64)


@lru_cache(maxsize=4096)
def _units_and_inverses(q: int) -> tuple[np.ndarray, np.ndarray]:
    x = units(q)
    return x, _inv_array(x, q)


# ---------------------------------------------------------------------------
# Kloosterman and Ramanujan sums


def kloosterman(a: int, b: int, q: int) -> SumValue:
    """S(a, b; q) = sum over units x mod q of e((a x + b xbar)/q)."""
    if q < 1:
        raise ValueError("modulus must be positive")
    if q == 1:
        return SumValue(1 + 0j)
    _check_budget(q, "kloosterman")
    x, xi = _units_and_inverses(q)
    val = _roots_sum((a % q) * x + (b % q) * xi, q)
    # S(a,b;q) is real: x -> -x conjugates each term.
    assert abs(val.imag) < _REAL_TOL * max(1.0, q), val
    return SumValue(complex(val.real, 0.0))


def kloosterman_crt(a: int, b: int, q: int) -> SumValue:
    """S(a, b; q) via twisted multiplicativity over the prime-power factors of q.

    For coprime r, s: S(a, b; rs) = S(a sbar, b sbar; r) * S(a rbar, b rbar; s).
    """
    if q < 1:
        raise ValueError("modulus must be positive")
    fac = factorize(q).factorization
    if len(fac) <= 1:
        return kloosterman(a, b, q)
    r = fac[0][0] ** fac[0][1]
    s = q // r
    rinv = pow(r % s, -1, s)
    sinv = pow(s % r, -1, r)
    left = kloosterman(a * sinv, b * sinv, r).value
    right = kloosterman_crt(a * rinv, b * rinv, s).value
    return SumValue(left * right)


def ramanujan_sum(q: int, n: int) -> SumValue:
    """c_q(n) by the divisor formula: sum over d | gcd(q, n) of d * mu(q/d)."""
    if q < 1:
        raise ValueError("modulus must be positive")
    g = math.gcd(q, n) if n != 0 else q
    return SumValue(complex(sum(e * mobius(q // e) for e in divisors(g))))


def ramanujan_sum_direct(q: int, n: int) -> SumValue:
    """c_q(n) by summing e(n x / q) over units x mod q."""
    if q == 1:
        return SumValue(1 + 0j)
    val = _roots_sum((n % q) * units(q), q)
    assert abs(val.imag) < _REAL_TOL * q
    return SumValue(complex(round(val.real)))


@lru_cache(maxsize=8192)
def _kloosterman_row(a: int, q: int) -> np.ndarray:
    """Array whose entry beta is S(a, beta; q)."""
    if q == 1:
        return np.ones(1, dtype=np.complex128)
    x, xi = _units_and_inverses(q)
    beta = np.arange(q, dtype=np.int64)[:, None]
    idx = ((a % q) * x[None, :] + beta * xi[None, :]) % q
    tab = root_table(q)[idx]
    row = np.array([math.fsum(r) for r in tab.real], dtype=np.float64)
    row.setflags(write=False)
    return row.astype(np.complex128)


# ---------------------------------------------------------------------------
# Diagonal and off-diagonal character sums


def _check_freq(h: int, q: int) -> None:
    if math.gcd(h, q) != 1:
        raise BadFrequency(f"gcd({h}, {q}) != 1")


def _beta_products(q1: int, h1: int, q2: int, h2: int) -> np.ndarray:
    n = q1 * q2
    beta = np.arange(n, dtype=np.int64)
    k1 = _kloosterman_row(mod_inverse(h1, q1), q1)
    k2 = _kloosterman_row(mod_inverse(h2, q2), q2)
    return k1[beta % q1] * k2[beta % q2]


def diag_char_sum(q1: int, q2: int, h1: int, h2: int) -> SumValue:
    """Brute-force sum over beta mod q1 q2 of S(h1bar, beta; q1) S(h2bar, beta; q2)."""
    _check_freq(h1, q1)
    _check_freq(h2, q2)
    _check_budget(q1 * q2 + q1 * q1 + q2 * q2, "diag_char_sum")
    return SumValue(_csum(_beta_products(q1, h1, q2, h2)))


def diag_identity_value(q1: int, q2: int, h1: int, h2: int) -> SumValue:
    """Closed form q1^2 c_{q1}(h1bar - h2bar) when q1 = q2, else 0."""
    _check_freq(h1, q1)
    _check_freq(h2, q2)
    if q1 != q2:
        return SumValue(0j)
    a = mod_inverse(h1, q1) - mod_inverse(h2, q1)
    return SumValue(q1 * q1 * ramanujan_sum(q1, a).value)


@dataclass(frozen=True)
class CharSumParams:
    """Moduli and frequencies of the composite character sums.

    ``q2p`` is the modulus of the second copy that enters the Poisson-dual
    sum; it defaults to ``q2``.
    """

    q1: int
    q2: int
    h1: int = 1
    h2: int = 1
    h2p: int = 1
    m: int = 0
    q2p: int | None = None

    def __post_init__(self):
        if self.q1 < 1 or self.q2 < 1 or (self.q2p is not None and self.q2p < 1):
            raise ValueError("moduli must be positive")
        if 0 in (self.h1, self.h2, self.h2p):
            raise BadFrequency("frequencies h must be nonzero")

    @property
    def q2b(self) -> int:
        return self.q2 if self.q2p is None else self.q2p

    @cached_property
    def d(self) -> int:
        return math.gcd(self.q1, self.q2)

    @cached_property
    def split1(self):
        return gcd_split(self.q1, self.d)

    @cached_property
    def split2(self):
        return gcd_split(self.q2, self.d)

    @cached_property
    def split2p(self):
        return gcd_split(self.q2b, self.d)

    @property
    def u1(self) -> int:
        return self.split1.u

    @property
    def v1(self) -> int:
        return self.split1.v

    @property
    def u2(self) -> int:
        return self.split2.u

    @property
    def v2(self) -> int:
        return self.split2.v

    @property
    def u2p(self) -> int:
        return self.split2p.u

    @property
    def v2p(self) -> int:
        return self.split2p.v

    @property
    def v1t(self) -> int | None:
        return self.split1.v_tilde

    @property
    def v2t(self) -> int | None:
        return self.split2.v_tilde

    @property
    def v2pt(self) -> int | None:
        return self.split2p.v_tilde

    @property
    def mt(self) -> int | None:
        return self.m // self.d if self.m % self.d == 0 else None

    def derived(self) -> dict:
        return dict(
            d=self.d, u1=self.u1, v1=self.v1, u2=self.u2, v2=self.v2,
            u2p=self.u2p, v2p=self.v2p, v1t=self.v1t, v2t=self.v2t,
            v2pt=self.v2pt, mt=self.mt,
        )


def offdiag_char_sum_bruteforce(p: CharSumParams) -> SumValue:
    """sum over beta mod q1 q2 of S(h1bar, beta; q1) S(h2bar, beta; q2) e(m beta/(q1 q2))."""
    _check_freq(p.h1, p.q1)
    _check_freq(p.h2, p.q2)
    n = p.q1 * p.q2
    _check_budget(n + p.q1 * p.q1 + p.q2 * p.q2, "offdiag_char_sum_bruteforce")
    prod = _beta_products(p.q1, p.h1, p.q2, p.h2)
    tw = root_table(n)[(p.m % n) * np.arange(n, dtype=np.int64) % n]
    return SumValue(_csum(prod * tw))


def offdiag_bruteforce_all_m(q1: int, q2: int, h1: int, h2: int) -> np.ndarray:
    """Brute-force off-diagonal sums for every m mod q1 q2 at once.

    Entry m is the direct sum over beta; the m-loop is a dense matrix product
    against the table of e(m beta / (q1 q2)).
    """
    _check_freq(h1, q1)
    _check_freq(h2, q2)
    n = q1 * q2
    _check_budget(n * n, "offdiag_bruteforce_all_m")
    prod = _beta_products(q1, h1, q2, h2)
    k = np.arange(n, dtype=np.int64)
    tw = root_table(n)[np.outer(k, k) % n]
    return tw @ prod


def _e3(v1: int, v2: int, u1: int, u2: int, h1: int, h2: int, m: int) -> complex:
    """Sum over units x mod v1, y mod v2 with u2 v2 x + u1 v1 y = -m mod v1 v2
    of e(h1bar u1bar xbar / v1) e(h2bar u2bar ybar / v2)."""
    mod = v1 * v2
    if mod == 1:
        return 1 + 0j
    x, xi = _units_and_inverses(v1)
    y, yi = _units_and_inverses(v2)
    cond = (u2 * v2 * x[:, None] + u1 * v1 * y[None, :] + m) % mod == 0
    if not cond.any():
        return 0j
    c1 = _inv(h1 * u1, v1)
    c2 = _inv(h2 * u2, v2)
    ph = (c1 * xi[:, None] * v2 + c2 * yi[None, :] * v1) % mod
    return _roots_sum(ph[cond], mod)


def _e_rational(num: int, den: int) -> complex:
    return complex(root_table(den)[num % den]) if den > 1 else 1 + 0j


def _reciprocity_factor(c: int, B: int, u: int) -> complex:
    """e(-c Bbar / u) written as e(c s ubar/|B|) e(-c s/(|B| u)), s = sign(B).

    The second factor is the non-periodic term produced by reciprocity.
    """
    s = 1 if B > 0 else -1
    Ba = abs(B)
    periodic = _e_rational(c * s * _inv(u, Ba), Ba)
    correction = np.exp(-2j * np.pi * math.fmod(c * s / (Ba * u), 1.0))
    return periodic * correction


def offdiag_char_sum_factored(p: CharSumParams, form: str = "reciprocity") -> SumValue:
    """q1 q2 E1 E2 E3 with E1, E2 unimodular and E3 a congruence-restricted double sum.

    ``form='reciprocity'`` writes E1 and E2 with the small moduli m h_i vt_i
    times the retained non-periodic reciprocity factor; ``form='direct'`` uses
    E1 = e(-mbar h1bar v1bar u2 v2 / u1) directly.
    """
    _check_freq(p.h1, p.q1)
    _check_freq(p.h2, p.q2)
    d = p.d
    if p.m % d:
        raise NonDivisible(f"d = {d} does not divide m = {p.m}")
    u1, v1, u2, v2, m = p.u1, p.v1, p.u2, p.v2, p.m
    if math.gcd(m, u1) != 1 or math.gcd(m, u2) != 1:
        return SumValue(0j)
    _check_budget(v1 * v2, "offdiag_char_sum_factored")
    if form == "direct" or m == 0:
        e1 = _e_rational(-_inv(m * p.h1 * v1, u1) * u2 * v2, u1)
        e2 = _e_rational(-_inv(m * p.h2 * v2, u2) * u1 * v1, u2)
    elif form == "reciprocity":
        vt1, vt2 = v1 // d, v2 // d
        e1 = _reciprocity_factor(u2 * vt2, m * p.h1 * vt1, u1)
        e2 = _reciprocity_factor(u1 * vt1, m * p.h2 * vt2, u2)
    else:
        raise ValueError(f"unknown form {form!r}")
    e3 = _e3(v1, v2, u1, u2, p.h1, p.h2, m)
    return SumValue(p.q1 * p.q2 * e1 * e2 * e3)


# ---------------------------------------------------------------------------
# The Poisson-dual sum C(ut1) and its factorization


@dataclass(frozen=True)
class _CData:
    d: int
    mt: int
    h1: int
    h2: int
    h2p: int
    u2: int
    u2p: int
    v1: int
    v2: int
    v2p: int
    vt1: int
    vt2: int
    vt2p: int

    @property
    def m(self) -> int:
        return self.d * self.mt

    @property
    def M(self) -> int:
        return self.mt * self.h1 * self.h2 * self.h2p

    @property
    def V(self) -> int:
        return self.vt1 * self.vt2 * self.vt2p * self.d

    @property
    def N(self) -> int:
        return self.M * self.V


def _cdata(p: CharSumParams) -> _CData:
    d = p.d
    if p.m <= 0:
        raise BadFrequency("the dual sum needs m > 0")
    if p.m % d:
        raise NonDivisible(f"d = {d} does not divide m = {p.m}")
    if p.v1t is None or p.v2t is None or p.v2pt is None:
        raise NonDivisible("d must divide v1, v2 and v2p")
    mt = p.m // d
    h1, h2, h2p = abs(p.h1), abs(p.h2), abs(p.h2p)
    if math.gcd(mt * h1 * h2 * h2p, d) != 1:
        raise BadFrequency("mt h1 h2 h2p must be coprime to d")
    if math.gcd(mt * h1, h2 * h2p) != 1:
        raise BadFrequency("mt h1 must be coprime to h2 h2p")
    for u, h in ((p.u2, h2), (p.u2p, h2p)):
        if math.gcd(u, mt * h) != 1:
            raise BadFrequency("u2 must be coprime to mt h2")
    return _CData(d, mt, h1, h2, h2p, p.u2, p.u2p, p.v1, p.v2, p.v2p,
                  p.v1t, p.v2t, p.v2pt)


def _e3_table(c: _CData, u2: int, v2: int, h2: int) -> tuple[int, np.ndarray]:
    """E3 as a function of the residue of u1 mod lcm(v1, v2)."""
    L = math.lcm(c.v1, v2)
    out = np.zeros(L, dtype=np.complex128)
    for r in range(L):
        if math.gcd(r, L) == 1:
            out[r] = _e3(c.v1, v2, r, u2, c.h1, h2, c.m)
    return L, out


def C_bruteforce(p: CharSumParams, u1_tilde: int) -> SumValue:
    """Sum over units alpha mod N = m h1 h2 h2p vt1 vt2 vt2p of the periodic
    character attached to the pair (q2, q2p), twisted by e(-ut1 alpha / N)."""
    c = _cdata(p)
    N = c.N
    L, t3 = _e3_table(c, c.u2, c.v2, c.h2)
    Lp, t3p = _e3_table(c, c.u2p, c.v2p, c.h2p)
    _check_budget(N + L * c.v1 * c.v2 + Lp * c.v1 * c.v2p, "C_bruteforce")
    alpha = units(N)
    if N == 1:
        return SumValue(complex(t3[0] * np.conj(t3p[0])))
    ainv = _inv_array(alpha, N)
    m = c.m
    D1 = m * c.h1 * c.vt1
    D2 = m * c.h2 * c.vt2
    D2p = m * c.h2p * c.vt2p
    num = (
        (c.u2 * c.vt2 - c.u2p * c.vt2p) * (ainv % D1) % D1 * (N // D1)
        + alpha * (c.vt1 * _inv(c.u2, D2) % D2) % D2 * (N // D2)
        - alpha * (c.vt1 * _inv(c.u2p, D2p) % D2p) % D2p * (N // D2p)
        - (u1_tilde % N) * alpha
    ) % N
    vals = root_table(N)[num] * t3[alpha % L] * np.conj(t3p[alpha % Lp])
    return SumValue(_csum(vals))


def C_factor_mh1(p: CharSumParams, u1_tilde: int) -> SumValue:
    """Kloosterman factor modulo mt h1."""
    c = _cdata(p)
    q = c.mt * c.h1
    if q == 1:
        return SumValue(1 + 0j)
    A = (c.u2 * c.vt2 - c.u2p * c.vt2p) * _inv(c.d * c.vt1, q)
    br = (_inv(c.u2 * c.d * c.vt2 * c.h2, c.mt) - _inv(c.u2p * c.d * c.vt2p * c.h2p, c.mt))
    B = c.h1 * (c.vt1 * br % c.mt) - u1_tilde * _inv(c.V * c.h2 * c.h2p, q)
    return kloosterman(A, B, q)


def C_factor_h2h2p(p: CharSumParams, u1_tilde: int) -> SumValue:
    """Ramanujan factor modulo h2 h2p."""
    c = _cdata(p)
    H = c.h2 * c.h2p
    if H == 1:
        return SumValue(1 + 0j)
    r = (
        c.h2p * (c.vt1 * _inv(c.u2 * c.d * c.vt2 * c.mt, c.h2) % c.h2)
        - c.h2 * (c.vt1 * _inv(c.u2p * c.d * c.vt2p * c.mt, c.h2p) % c.h2p)
        - u1_tilde * _inv(c.V * c.mt * c.h1, H)
    )
    return ramanujan_sum(H, r)


def _pval(n: int, p: int) -> int:
    k = 0
    while n % p == 0:
        n //= p
        k += 1
    return k


def local_exponents(p: CharSumParams, prime: int) -> tuple[int, int, int, int]:
    """(a, b, c, dd): exponents of ``prime`` in d, vt1, vt2 and vt2p."""
    c = _cdata(p)
    if c.d % prime:
        raise ValueError(f"{prime} does not divide d = {c.d}")
    return (_pval(c.d, prime), _pval(c.vt1, prime), _pval(c.vt2, prime),
            _pval(c.vt2p, prime))


def _kl_grid(A: np.ndarray, B: np.ndarray, q: int) -> complex:
    """Sum of S(A_k, B_k; q) over paired coefficient arrays."""
    x, xi = _units_and_inverses(q)
    # Histogram of (A, B) pairs first: many coefficient pairs repeat.
    key = (A % q) * q + (B % q)
    uk, cnt = np.unique(key, return_counts=True)
    a = (uk // q)[:, None]
    b = (uk % q)[:, None]
    vals = root_table(q)[(a * x[None, :] + b * xi[None, :]) % q]
    per = vals.sum(axis=1)
    return _csum(per * cnt)


def local_factor_Cpj(p: CharSumParams, alpha2_modulus_prime, u1_tilde: int) -> SumValue:
    """Local factor at a prime of d via its Kloosterman representation.

    ``alpha2_modulus_prime`` is ``prime`` or ``(prime, (a, b, c, dd))``. When
    exponents are given they must describe an admissible layout: the prime may
    divide vt1 or vt2 vt2p but not both. The value is
    p^e * [p^e | ut1] * sum over the reduced auxiliary variables of
    S(A, B; p^a), with e = b or c + dd.
    """
    if isinstance(alpha2_modulus_prime, (tuple, list)):
        prime, exps = alpha2_modulus_prime
    else:
        prime, exps = alpha2_modulus_prime, None
    derived = local_exponents(p, prime)
    if exps is None:
        exps = derived
    a, b, cc, dd = (int(e) for e in exps)
    if b and (cc or dd):
        raise PatternMismatch(f"prime {prime} divides both vt1 and vt2 vt2p: {exps}")
    if tuple(exps) != derived:
        raise PatternMismatch(f"exponents {tuple(exps)} do not match parameters {derived}")
    c = _cdata(p)
    pa = prime**a
    mtinv = _inv(c.mt, pa)
    if b or not (cc or dd):
        e = b
        pab = prime ** (a + b)
        if u1_tilde % prime**e:
            return SumValue(0j)
        kap = c.u2 * c.vt2 * _inv(c.mt * c.h1 * (c.d * c.vt1 // pab), pa)
        kapp = c.u2p * c.vt2p * _inv(c.mt * c.h1 * (c.d * c.vt1 // pab), pa)
        lam = c.vt1 * _inv(c.u2 * c.mt * c.h2 * (c.d * c.vt2 // pa), pa)
        lamp = c.vt1 * _inv(c.u2p * c.mt * c.h2p * (c.d * c.vt2p // pa), pa)
        mu = _inv(c.M * (c.V // pab), pa)
        th = _inv(c.h2 * c.u2 * (c.v2 // pa), pa)
        thp = _inv(c.h2p * c.u2p * (c.v2p // pa), pa)
        z, zi = _units_and_inverses(pa)
        ok = np.gcd(1 + prime**b * z, prime) == 1
        z, zi = z[ok], zi[ok]
        Z = np.array([(pow(int(1 + prime**b * t), -1, pab) - 1) // prime**b for t in z],
                     dtype=np.int64) % pa
        w = mtinv * (c.vt1 // prime**b) % pa
        Acoef = (kapp * Z[None, :] - kap * Z[:, None]) % pa
        Bcoef = (lam - lamp + w * (th * zi[:, None] - thp * zi[None, :])
                 - (u1_tilde // prime**e) * mu) % pa
    else:
        e = cc + dd
        if u1_tilde % prime**e:
            return SumValue(0j)
        pac, pad = prime ** (a + cc), prime ** (a + dd)
        kap = c.u2 * c.vt2 * _inv(c.mt * c.h1 * (c.d * c.vt1 // pa), pa)
        kapp = c.u2p * c.vt2p * _inv(c.mt * c.h1 * (c.d * c.vt1 // pa), pa)
        lam = c.vt1 * _inv(c.u2 * c.mt * c.h2 * (c.d * c.vt2 // pac), pa)
        lamp = c.vt1 * _inv(c.u2p * c.mt * c.h2p * (c.d * c.vt2p // pad), pa)
        eta = _inv(c.h1 * (c.v1 // pa), pa)
        mu = _inv(c.M * (c.V // prime ** (a + cc + dd)), pa)
        w, wi = _units_and_inverses(pa)

        def expand(k: int, pk: int):
            ok = np.gcd(1 + prime**k * w, prime) == 1
            W = np.array([(pow(int(1 + prime**k * t), -1, pk) - 1) // prime**k
                          for t in w[ok]], dtype=np.int64) % pa
            return wi[ok], W

        wi1, W1 = expand(cc, pac)
        wi2, W2 = expand(dd, pad)
        g1 = c.u2 * (c.vt2 // prime**cc)
        g2 = c.u2p * (c.vt2p // prime**dd)
        Acoef = (kap - kapp + eta * mtinv * (g1 * wi1[:, None] - g2 * wi2[None, :])) % pa
        Bcoef = (lamp * W2[None, :] - lam * W1[:, None] - (u1_tilde // prime**e) * mu) % pa
    total = _kl_grid(Acoef.ravel(), Bcoef.ravel(), pa)
    return SumValue(prime**e * total)


def local_factor_Cpj_bruteforce(p: CharSumParams, prime: int, u1_tilde: int) -> SumValue:
    """Local factor by direct summation over units alpha mod the prime part of
    V = vt1 vt2 vt2p d, with every phase localized by CRT."""
    c = _cdata(p)
    a, b, cc, dd = local_exponents(p, prime)

    def pp(n: int) -> int:
        return prime ** _pval(n, prime)

    P = pp(c.V)
    alpha, ainv = _units_and_inverses(P)
    terms = np.zeros(alpha.size, dtype=np.int64)
    # Each global term e(X/D) contributes e(X * inv(D/D_p) / D_p) locally.
    Dv1 = c.d * c.vt1
    P1 = pp(Dv1)
    k1 = (c.u2 * c.vt2 - c.u2p * c.vt2p) * _inv(c.mt * c.h1 * (Dv1 // P1), P1)
    phase = []
    phase.append((k1 * (ainv % P1)) % P1 * (P // P1))
    for u, vt, h, sgn in ((c.u2, c.vt2, c.h2, 1), (c.u2p, c.vt2p, c.h2p, -1)):
        D = c.d * vt
        Pd = pp(D)
        lam = c.vt1 * _inv(u * c.mt * h * (D // Pd), Pd)
        phase.append(sgn * (lam * alpha % Pd) * (P // Pd))
    mu = _inv(c.M * (c.V // P), P)
    phase.append(-(u1_tilde % P) * mu * alpha)
    for ph in phase:
        terms = (terms + ph) % P
    base = root_table(P)[terms % P]

    def e3_local(u2: int, v2: int, vt2: int, h2: int, r: int) -> complex:
        Px, Py = pp(c.v1), pp(v2)
        mod = pp(c.d * c.vt1 * vt2)
        x, xi = _units_and_inverses(Px)
        y, yi = _units_and_inverses(Py)
        cond = (u2 * vt2 * x[:, None] + r * c.vt1 * y[None, :] + c.mt) % mod == 0
        if not cond.any():
            return 0j
        eta = _inv(c.h1 * r * (c.v1 // Px), Px)
        th = _inv(h2 * u2 * (v2 // Py), Py)
        L = math.lcm(Px, Py)
        ph = (eta * xi[:, None] * (L // Px) + th * yi[None, :] * (L // Py)) % L
        return _roots_sum(ph[cond], L)

    e3 = np.array([e3_local(c.u2, c.v2, c.vt2, c.h2, int(r)) for r in alpha])
    e3p = np.array([e3_local(c.u2p, c.v2p, c.vt2p, c.h2p, int(r)) for r in alpha])
    return SumValue(_csum(base * e3 * np.conj(e3p)))


def _M_part_bruteforce(p: CharSumParams, u1_tilde: int) -> SumValue:
    """Sum over units alpha mod M of the M-component of the character."""
    c = _cdata(p)
    M, V = c.M, c.V
    if M == 1:
        return SumValue(1 + 0j)
    alpha, ainv = _units_and_inverses(M)
    tot = np.zeros(alpha.size, dtype=np.int64)
    m1 = c.mt * c.h1
    k = (c.u2 * c.vt2 - c.u2p * c.vt2p) * _inv(c.d * c.vt1, m1)
    tot += (k * (ainv % m1)) % m1 * (M // m1)
    for u, vt, h, sgn in ((c.u2, c.vt2, c.h2, 1), (c.u2p, c.vt2p, c.h2p, -1)):
        D = c.mt * h
        lam = c.vt1 * _inv(u * c.d * vt, D)
        tot += sgn * ((lam * alpha) % D) * (M // D)
    tot -= (u1_tilde % M) * _inv(V, M) * alpha
    return SumValue(_roots_sum(tot % M, M))


def C_factored(p: CharSumParams, u1_tilde: int) -> tuple[SumValue, dict]:
    """Product of the Kloosterman, Ramanujan and local prime factors."""
    c = _cdata(p)
    parts = {
        "mh1": C_factor_mh1(p, u1_tilde).value,
        "h2h2p": C_factor_h2h2p(p, u1_tilde).value,
    }
    val = parts["mh1"] * parts["h2h2p"]
    for prime, _ in factorize(c.d).factorization:
        f = local_factor_Cpj(p, prime, u1_tilde).value
        parts[f"p{prime}"] = f
        val *= f
    return SumValue(val), parts


@dataclass
class DecompositionReport:
    params: CharSumParams
    u1_tilde: int
    brute: complex
    factored: complex
    factors: dict
    support_modulus: int
    in_support: bool
    equal: bool
    support_ok: bool
    tol: float = field(default=0.0)

    @property
    def ok(self) -> bool:
        return self.equal and self.support_ok


def full_C_decomposition_check(p: CharSumParams, u1_tilde: int,
                               tol: float = 1e-8) -> DecompositionReport:
    """Check C = C_mh1 * C_h2h2p * prod_j C_pj and the vt1 vt2 vt2p | ut1 support law."""
    c = _cdata(p)
    brute = C_bruteforce(p, u1_tilde).value
    fac, parts = C_factored(p, u1_tilde)
    scale = tol * max(1.0, float(c.N))
    sup = c.vt1 * c.vt2 * c.vt2p
    in_support = u1_tilde % sup == 0
    equal = abs(brute - fac.value) <= scale
    support_ok = in_support or abs(brute) <= scale
    return DecompositionReport(p, u1_tilde, brute, fac.value, parts, sup,
                               in_support, equal, support_ok, scale)


# ---------------------------------------------------------------------------
# Bounds


@dataclass(frozen=True)
class WeilResult:
    ok: bool
    ratio: float
    value: float
    bound: float

    def __iter__(self):
        return iter((self.ok, self.ratio))


def weil_check(a: int, b: int, q: int) -> WeilResult:
    """|S(a,b;q)| <= tau(q) sqrt(q) sqrt(gcd(a,b,q))."""
    s = abs(kloosterman(a, b, q).value)
    g = math.gcd(math.gcd(a, b), q)
    bound = num_divisors(q) * math.sqrt(q) * math.sqrt(g)
    return WeilResult(s <= bound * (1 + 1e-12), s / bound, s, bound)


@dataclass
class AverageBoundReport:
    rows: list[dict]
    U: int
    max_ratio: float


def average_bound_report(grid: Iterable[CharSumParams], U: int = 64,
                         use_bruteforce: bool = False) -> AverageBoundReport:
    """Ratio of sum_{ut1 <= U} |C(ut1)| to U d^{5/2} sqrt(mt h1) for each grid point.

    The observed maximum is reported, never compared with a theorem constant.
    """
    rows = []
    for p in grid:
        c = _cdata(p)
        f = C_bruteforce if use_bruteforce else (lambda q, u: C_factored(q, u)[0])
        total = math.fsum(abs(f(p, u).value) for u in range(1, U + 1))
        side = U * c.d**2.5 * math.sqrt(c.mt * c.h1)
        rows.append(dict(params=p, d=c.d, mt=c.mt, h1=c.h1, sum_abs=total,
                         bound_side=side, ratio=total / side))
    mx = max((r["ratio"] for r in rows), default=0.0)
    return AverageBoundReport(rows, U, mx)


def ramanujan_bound_slack(q: int, a: int) -> tuple[float, int, int]:
    """(|c_q(a)|, gcd(q, a), tau(q / gcd)) for recording observed maxima."""
    g = math.gcd(q, a) if a else q
    return abs(ramanujan_sum(q, a).value), g, num_divisors(q // g)


def phi(q: int) -> int:
    return euler_phi(q)
