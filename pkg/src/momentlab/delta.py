"""Finite delta-symbol expansion with moduli up to Q.

For a smooth weight w supported in [Q/2, Q] with sum_{d >= 1} w(d) = 1,

    delta(n) = sum_{q <= Q} c_q(n) Delta_q(n),
    Delta_q(u) = sum_{r >= 1} (w(q r) - w(|u| / (q r))) / (q r),

where c_q is the Ramanujan sum. The identity is exact: it is the divisor
symmetry d <-> n/d of sum_{d | n} (w(d) - w(|n|/d)) written through
additive characters.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from .errors import DegenerateSupport, QuadratureFailure
from .expsums import ramanujan_sum

__all__ = ["DeltaExpansion", "build_expansion", "delta_eval", "g_probe", "bump"]


def bump(s):
    """exp(-1/(1 - s^2)) on (-1, 1), zero elsewhere."""
    s = np.asarray(s, dtype=np.float64)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1
    out[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
    return out


@dataclass(frozen=True)
class DeltaExpansion:
    Q: float
    norm: float
    support: tuple[float, float]
    shape: Callable = field(default=bump, repr=False)
    # Largest modulus ever used; every q > qmax has w(q r) = w(|n|/(q r)) = 0.
    qmax: int = 0

    def w(self, t):
        """Normalized weight w(t) = norm * shape(4 t / Q - 3)."""
        t = np.asarray(t, dtype=np.float64)
        return self.norm * self.shape(4.0 * t / self.Q - 3.0)

    def mass(self) -> float:
        d = np.arange(1, int(math.floor(self.Q)) + 1)
        return math.fsum(self.w(d))


def build_expansion(Q: float, bump_fn: Callable = bump) -> DeltaExpansion:
    """Weight supported on [Q/2, Q], normalized over its integer samples.

    Raises DegenerateSupport when no integer lies strictly inside (Q/2, Q),
    where the bump is nonzero. Q = 3 is valid (d = 2 gives s = -1/3).
    """
    if not (Q > 0 and math.isfinite(Q)):
        raise ValueError("Q must be positive and finite")
    d = np.arange(1, int(math.floor(Q)) + 1)
    raw = bump_fn(4.0 * d / Q - 3.0)
    total = math.fsum(raw)
    if total <= 0:
        raise DegenerateSupport(f"no integer in the open support ({Q / 2}, {Q})")
    return DeltaExpansion(Q=float(Q), norm=1.0 / total, support=(Q / 2, Q),
                          shape=bump_fn, qmax=int(math.floor(Q)))


def _delta_q_terms(q: int, absn: int, exp: DeltaExpansion) -> float:
    Q = exp.Q
    # w(q r) needs q r in (Q/2, Q)
    r1 = np.arange(max(1, math.floor(Q / (2 * q))), math.floor(Q / q) + 1)
    first = exp.w(q * r1) / (q * r1)
    if absn == 0:
        return math.fsum(first)
    # w(|n|/(q r)) needs q r in (|n|/Q, 2|n|/Q)
    r2 = np.arange(max(1, math.floor(absn / (Q * q))), math.floor(2 * absn / (Q * q)) + 2)
    second = exp.w(absn / (q * r2)) / (q * r2)
    return math.fsum(np.concatenate([first, -second]))


def delta_eval(n: int, exp: DeltaExpansion) -> float:
    """Evaluate sum_q c_q(n) Delta_q(n); equals 1 at n = 0 and 0 otherwise."""
    absn = abs(int(n))
    if absn > exp.Q**2 / 2:
        raise ValueError(f"|n| = {absn} exceeds Q^2/2; moduli above Q would be needed")
    terms = []
    for q in range(1, exp.qmax + 1):
        dq = _delta_q_terms(q, absn, exp)
        if dq != 0.0:
            terms.append(ramanujan_sum(q, absn).value.real * dq)
    return math.fsum(terms)


def _G(v: float, exp: DeltaExpansion) -> float:
    """q * F(q Q v) with F(u) = sum_r w(|u|/(q r))/(q r); independent of q."""
    if v <= 0.5:
        return 0.0
    r = np.arange(max(1, math.floor(v)), math.floor(2 * v) + 2)
    return math.fsum(exp.w(exp.Q * v / r) / r)


@dataclass(frozen=True)
class GProbe:
    value: float
    err: float
    delta_mass: float  # Delta_q(infinity): weight of the point mass at x = 0
    vmax: float


def g_probe(q: int, x: float, exp: DeltaExpansion, tol: float = 1e-10,
            max_oscillations: float = 1e5) -> GProbe:
    """Recover g(q, x) with Delta_q(u) = (1/(qQ)) int g(q, t) e(u t/(qQ)) dt.

    Delta_q tends to a constant as |u| grows; that constant is a point mass
    of g at 0 and is returned as ``delta_mass``. The smooth part is

        g(q, x) = 2 Q int_0^inf (G_inf - G(v)) cos(2 pi v x) dv,

    with G(v) = sum_r w(Q v / r) / r and G_inf = int w(s)/s ds.
    """
    if not 1 <= q <= 2 * exp.Q:
        raise ValueError("q must satisfy 1 <= q <= 2Q")
    Q = exp.Q
    g_inf, _ = integrate.quad(lambda s: float(exp.w(s)) / s, Q / 2, Q,
                              epsabs=1e-15, epsrel=1e-13, limit=200)
    # Find where the Riemann sum G(v) has converged to G_inf.
    vmax = 1.0
    while True:
        probe = np.linspace(vmax, 2 * vmax, 17)
        if max(abs(_G(v, exp) - g_inf) for v in probe) < tol * g_inf:
            break
        vmax *= 2
        if vmax > 1e6:
            raise QuadratureFailure("Delta_q did not settle to its limit")
    if abs(x) * vmax > max_oscillations:
        raise QuadratureFailure(f"{abs(x) * vmax:.3g} oscillations exceeds budget")

    def f(v):
        return g_inf - _G(v, exp)

    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            if x == 0:
                val, err = integrate.quad(f, 0.0, vmax, epsabs=tol, limit=2000,
                                          points=[0.5, 1.0])
            else:
                val, err = integrate.quad(f, 0.0, vmax, weight="cos", wvar=2 * math.pi * x,
                                          epsabs=tol, limit=5000)
        except integrate.IntegrationWarning as exc:
            # Roundoff-limited convergence is acceptable for a diagnostic;
            # subdivision or cycle exhaustion is not.
            if "roundoff" not in str(exc):
                raise QuadratureFailure(str(exc)) from exc
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, err = integrate.quad(f, 0.0, vmax, weight="cos", wvar=2 * math.pi * x,
                                      epsabs=tol, limit=5000)
    a_q = _delta_q_terms(q, 0, exp)
    mass = a_q - g_inf / q
    return GProbe(value=2 * Q * val, err=2 * Q * err + 2 * Q * tol * g_inf * vmax,
                  delta_mass=mass, vmax=vmax)
