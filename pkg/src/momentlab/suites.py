"""Seeded invariant suites run by ``momentlab verify``.

Each suite returns a list of ``Check`` records; a suite passes when every
check does. The suites are fast desk-scale versions of the test corpus.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .arith import divisors, euler_phi, factorize, mobius, mod_inverse
from .delta import build_expansion, delta_eval
from .expsums import (
    CharSumParams,
    diag_char_sum,
    diag_identity_value,
    kloosterman,
    kloosterman_crt,
    offdiag_char_sum_bruteforce,
    offdiag_char_sum_factored,
    weil_check,
)
from .gl3 import GL3Form, VoronoiWeight, voronoi_lhs, voronoi_rhs
from .moment import large_sieve_duality_check
from .oscillatory import Bump, PhaseDescriptor, bky_main_term, phase_voronoi_n, quad_oscillatory_1d


@dataclass(frozen=True)
class Check:
    suite: str
    tag: str
    passed: bool
    detail: str = ""


def _check(suite: str, tag: str, ok: bool, detail: str = "") -> Check:
    return Check(suite, tag, bool(ok), detail)


def suite_arith(rng: np.random.Generator) -> list[Check]:
    out = []
    ns = rng.integers(2, 10**6, 50)
    ok = all(math.prod(p**k for p, k in factorize(int(n)).factorization) == n for n in ns)
    out.append(_check("arith", "factorization-product", ok))
    ok = all(sum(mobius(d) for d in divisors(int(n))) == 0 for n in ns)
    out.append(_check("arith", "mobius-divisor-sum", ok))
    ok = all(sum(euler_phi(d) for d in divisors(int(n))) == n for n in ns[:20])
    out.append(_check("arith", "phi-divisor-sum", ok))
    bad = 0
    for _ in range(50):
        q = int(rng.integers(2, 10**6))
        a = int(rng.integers(1, q))
        if math.gcd(a, q) == 1:
            bad += (a * mod_inverse(a, q)) % q != 1
    out.append(_check("arith", "inverse", bad == 0, f"{bad} failures"))
    return out


def suite_charsum(rng: np.random.Generator) -> list[Check]:
    out = []
    worst = 0.0
    for q in rng.integers(1, 300, 30):
        a, b = (int(x) for x in rng.integers(-10**4, 10**4, 2))
        worst = max(worst, abs(kloosterman(a, b, int(q)).value - kloosterman_crt(a, b, int(q)).value))
    out.append(_check("charsum", "kloosterman-multiplicativity", worst < 1e-9, f"max diff {worst:.2e}"))
    ok = all(weil_check(int(rng.integers(1, 100)), int(rng.integers(1, 100)), int(q)).ok
             for q in rng.integers(2, 500, 20))
    out.append(_check("charsum", "weil-bound", ok))
    worst = 0.0
    for q1 in range(1, 13):
        for q2 in range(1, 13):
            h1, h2 = 1, 1 + int(rng.integers(0, 12))
            if math.gcd(h1, q1) == 1 and math.gcd(h2, q1) == 1 and math.gcd(h2, q2) == 1:
                worst = max(worst, abs(diag_char_sum(q1, q2, h1, h2).value
                                       - diag_identity_value(q1, q2, h1, h2).value))
    out.append(_check("charsum", "diagonal-identity", worst < 1e-8, f"max diff {worst:.2e}"))
    worst = 0.0
    for _ in range(20):
        q1, q2 = (int(x) for x in rng.integers(1, 20, 2))
        hs = [int(x) for x in rng.integers(1, 30, 3)]
        if any(math.gcd(h, q) != 1 for h, q in ((hs[0], q1), (hs[1], q2), (hs[2], q2))):
            continue
        m = int(rng.integers(-10, 10)) * math.gcd(q1, q2)  # the factored form needs d | m
        p = CharSumParams(q1, q2, hs[0], hs[1], hs[2], m)
        worst = max(worst, abs(offdiag_char_sum_bruteforce(p).value - offdiag_char_sum_factored(p).value))
    out.append(_check("charsum", "offdiagonal-factorization", worst < 1e-8, f"max diff {worst:.2e}"))
    return out


def suite_delta(rng: np.random.Generator) -> list[Check]:
    out = []
    for Q in (8, 16):
        exp = build_expansion(Q)
        lim = Q * Q // 4
        worst = max(abs(delta_eval(n, exp) - (n == 0)) for n in range(-lim, lim + 1))
        out.append(_check("delta", f"delta-identity-Q{Q}", worst < 1e-8, f"max error {worst:.2e}"))
    return out


def _quadratic(rng) -> PhaseDescriptor:
    lam = 10 ** rng.uniform(1.3, 3.3)
    c = rng.uniform(-0.3, 0.3)
    g = Bump(-1.0, 1.0)
    return PhaseDescriptor(lambda x: lam * (x - c) ** 2, g, (-1.0, 1.0),
                           lambda x: 2 * lam * (x - c), lambda x: 2 * lam + 0 * x,
                           theta_f=2 * lam, omega_g=g.scale)


def _voronoi_n(rng) -> PhaseDescriptor:
    while True:
        T = 10 ** rng.uniform(3, 5)
        X = T ** (23 / 44)
        m = 10 ** rng.uniform(0, 4)
        p = phase_voronoi_n(T, rng.uniform(-1, 1), X * rng.uniform(1, 2), int(rng.integers(1, 40)),
                            int(rng.integers(1, 6)), m, m * rng.uniform(1.5, 20)).descriptor
        if p.theta_f >= 5:
            return p


def suite_phases(rng: np.random.Generator, draws: int = 10) -> list[Check]:
    import warnings

    out = []
    for name, make in (("quadratic", _quadratic), ("voronoi-n", _voronoi_n)):
        worst = 0.0
        for _ in range(draws):
            p = make(rng)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                main = bky_main_term(p)
            ref = quad_oscillatory_1d(p).value
            worst = max(worst, abs(main.value - ref) / abs(ref) * p.theta_f / 10)
        out.append(_check("phases", f"stationary-phase-{name}", worst <= 1.0,
                          f"max error / (10/theta_f) = {worst:.3f}"))
    return out


def suite_voronoi(rng: np.random.Generator) -> list[Check]:
    form = GL3Form.tau3(5000)
    psi = VoronoiWeight(500.0)
    out = []
    for q in (1, 2, 3):
        units = [a for a in range(1, q + 1) if math.gcd(a, q) == 1]
        a = units[int(rng.integers(0, len(units)))]
        abar = mod_inverse(a, q) if q > 1 else 0
        lhs = voronoi_lhs(q, abar, psi, form)
        rhs = voronoi_rhs(q, a, psi, form)
        rel = abs(lhs - rhs) / abs(lhs)
        out.append(_check("voronoi", f"voronoi-q{q}", rel < 1e-3, f"relative gap {rel:.2e}"))
    return out


def suite_duality(rng: np.random.Generator, draws: int = 20) -> list[Check]:
    worst = 0.0
    for _ in range(draws):
        m, n = (int(x) for x in rng.integers(1, 30, 2))
        A = rng.normal(size=(m, n)) + 1j * rng.normal(size=(m, n))
        f, d = large_sieve_duality_check(A)
        worst = max(worst, abs(f - d) / f)
    return [_check("duality", "large-sieve-duality", worst < 1e-8, f"max relative gap {worst:.2e}")]


SUITES: dict[str, Callable[[np.random.Generator], list[Check]]] = {
    "arith": suite_arith,
    "charsum": suite_charsum,
    "delta": suite_delta,
    "phases": suite_phases,
    "voronoi": suite_voronoi,
    "duality": suite_duality,
}


def run_suite(name: str, seed: int) -> list[Check]:
    """Run one suite, or all of them in a fixed order; each gets its own stream."""
    names = list(SUITES) if name == "all" else [name]
    if any(n not in SUITES for n in names):
        raise KeyError(name)
    out = []
    for n in names:
        out += SUITES[n](np.random.default_rng([seed, list(SUITES).index(n)]))
    return out
