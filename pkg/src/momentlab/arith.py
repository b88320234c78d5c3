"""Exact integer and modular arithmetic used by every sum evaluator."""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import mpmath
import numpy as np

from .errors import NotInvertible

__all__ = [
    "Modulus",
    "GcdSplit",
    "mod_inverse",
    "factorize",
    "gcd_split",
    "unit_circle",
    "is_prime",
    "divisors",
    "mobius",
    "euler_phi",
    "num_divisors",
    "radical",
    "units",
    "root_table",
    "crt_pair",
]

_TRIAL_LIMIT = 10**6
# Deterministic Miller-Rabin witnesses, valid for n < 3.3e24.
_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41)


@dataclass(frozen=True)
class Modulus:
    q: int
    factorization: tuple[tuple[int, int], ...] = field(default=())

    def __post_init__(self):
        prod = 1
        last = 1
        for p, e in self.factorization:
            if p <= last or e < 1:
                raise ValueError(f"malformed factorization {self.factorization}")
            prod *= p**e
            last = p
        if prod != self.q:
            raise ValueError(f"factorization does not multiply to {self.q}")

    def __iter__(self):
        return iter(self.factorization)

    def __len__(self):
        return len(self.factorization)

    def __eq__(self, other):
        if isinstance(other, Modulus):
            return self.q == other.q
        return list(self.factorization) == list(other)

    def __hash__(self):
        return hash(self.q)

    @property
    def primes(self) -> list[int]:
        return [p for p, _ in self.factorization]


@dataclass(frozen=True)
class GcdSplit:
    """q = u*v with gcd(u, d) = 1 and every prime of v dividing d."""

    d: int
    u: int
    v: int
    v_tilde: int | None


def mod_inverse(a: int, q: int) -> int:
    """Return x in [0, q) with a*x = 1 mod q. By convention q = 1 gives 0."""
    if q < 1:
        raise ValueError("modulus must be positive")
    if q == 1:
        return 0
    if math.gcd(a, q) != 1:
        raise NotInvertible(f"gcd({a}, {q}) = {math.gcd(a, q)}")
    return pow(a % q, -1, q)


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    for p in _MR_BASES:
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def _pollard_rho(n: int) -> int:
    if n % 2 == 0:
        return 2
    rng = random.Random(n)
    while True:
        c = rng.randrange(1, n)
        x = y = rng.randrange(2, n)
        g = 1
        while g == 1:
            x = (x * x + c) % n
            y = (y * y + c) % n
            y = (y * y + c) % n
            g = math.gcd(abs(x - y), n)
        if g != n:
            return g


def _split_large(n: int, out: dict[int, int]) -> None:
    if n == 1:
        return
    if is_prime(n):
        out[n] = out.get(n, 0) + 1
        return
    f = _pollard_rho(n)
    _split_large(f, out)
    _split_large(n // f, out)


@lru_cache(maxsize=1 << 16)
def _factor_tuple(n: int) -> tuple[tuple[int, int], ...]:
    out: dict[int, int] = {}
    m = n
    for p in (2, 3):
        while m % p == 0:
            out[p] = out.get(p, 0) + 1
            m //= p
    p = 5
    step = 2
    while p * p <= m and p <= _TRIAL_LIMIT:
        while m % p == 0:
            out[p] = out.get(p, 0) + 1
            m //= p
        p += step
        step = 6 - step
    if m > 1:
        if p * p > m:
            out[m] = out.get(m, 0) + 1
        else:
            _split_large(m, out)
    return tuple(sorted(out.items()))


def factorize(n: int) -> Modulus:
    """Prime-power factorization, primes increasing. factorize(1) is empty."""
    if n < 1:
        raise ValueError("factorize needs n >= 1")
    return Modulus(n, _factor_tuple(n))


def radical(n: int) -> int:
    return math.prod(p for p, _ in _factor_tuple(n))


def gcd_split(q: int, d: int) -> GcdSplit:
    """Split q = u*v where v collects the primes of q that divide d."""
    if d < 1 or q < 1:
        raise ValueError("gcd_split needs positive arguments")
    v = 1
    for p, e in _factor_tuple(q):
        if d % p == 0:
            v *= p**e
    u = q // v
    return GcdSplit(d=d, u=u, v=v, v_tilde=v // d if v % d == 0 else None)


def divisors(n: int) -> list[int]:
    divs = [1]
    for p, e in _factor_tuple(n):
        divs = [x * p**k for x in divs for k in range(e + 1)]
    return sorted(divs)


def mobius(n: int) -> int:
    fac = _factor_tuple(n)
    if any(e > 1 for _, e in fac):
        return 0
    return -1 if len(fac) % 2 else 1


def euler_phi(n: int) -> int:
    out = n
    for p, _ in _factor_tuple(n):
        out = out // p * (p - 1)
    return out


def num_divisors(n: int) -> int:
    return math.prod(e + 1 for _, e in _factor_tuple(n))


def units(q: int) -> np.ndarray:
    """Reduced residues mod q as an int64 array; q = 1 gives [0]."""
    x = np.arange(q, dtype=np.int64)
    return x[np.gcd(x, q) == 1]


@lru_cache(maxsize=256)
def _root_table(q: int) -> np.ndarray:
    k = np.arange(q, dtype=np.float64)
    # Evaluate on the symmetric range (-1/2, 1/2] to keep the argument small.
    frac = np.where(k > q / 2, k - q, k) / q
    t = np.exp(2j * np.pi * frac)
    t.setflags(write=False)
    return t


def root_table(q: int) -> np.ndarray:
    """Array with entry k equal to e(k/q)."""
    return _root_table(int(q))


def crt_pair(r1: int, m1: int, r2: int, m2: int) -> int:
    """Solve x = r1 mod m1, x = r2 mod m2 for coprime m1, m2."""
    if m1 == 1:
        return r2 % m2
    if m2 == 1:
        return r1 % m1
    t = (r2 - r1) * pow(m1, -1, m2) % m2
    return (r1 + m1 * t) % (m1 * m2)


def _reduce_frac(x: Fraction) -> float:
    r = x - math.floor(x)
    if r > Fraction(1, 2):
        r -= 1
    return float(r)


def unit_circle(x) -> complex:
    """e(x) = exp(2*pi*i*x) with the argument reduced mod 1 first.

    Rationals (``Fraction`` or int) are reduced exactly. Floats are reduced
    with ``math.fmod``, which is exact in binary floating point, and the
    trigonometric evaluation is done in extended precision.
    """
    if isinstance(x, int):
        return 1 + 0j
    if isinstance(x, Fraction):
        r = _reduce_frac(x)
        if r == 0.0:
            return 1 + 0j
        if r == 0.5 or r == -0.5:
            return -1 + 0j
        if r == 0.25:
            return 1j
        if r == -0.25:
            return -1j
        with mpmath.workprec(80):
            z = mpmath.expjpi(2 * mpmath.mpf(x.numerator % x.denominator) / x.denominator)
        return complex(z)
    x = float(x)
    if not math.isfinite(x):
        raise ValueError("unit_circle needs a finite argument")
    r = math.fmod(x, 1.0)
    if r > 0.5:
        r -= 1.0
    elif r <= -0.5:
        r += 1.0
    if r == 0.0:
        return 1 + 0j
    if r == 0.5 or r == -0.5:
        return -1 + 0j
    if r == 0.25:
        return 1j
    if r == -0.25:
        return -1j
    with mpmath.workprec(80):
        z = mpmath.expjpi(2 * mpmath.mpf(r))
    return complex(z)
