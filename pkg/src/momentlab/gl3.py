"""GL(3) coefficient data, gamma factors, approximate functional equation and
Voronoi summation.

The desk-scale form is the minimal-parabolic Eisenstein series with Langlands
parameters (0, 0, 0): A(1, n) = tau_3(n) and L(F, s) = zeta(s)^3. Its
L-function has a triple pole at s = 1, which adds a polar term to both the
approximate functional equation and the Voronoi formula. Cuspidal data can be
loaded from a coefficient file; such forms have no polar terms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable, Sequence

import mpmath
import numpy as np
from scipy.special import loggamma

from .arith import divisors, mobius, mod_inverse, root_table
from .errors import (
    ContourFailure,
    OutOfRange,
    PoleEncountered,
    QuadratureFailure,
    RegimeViolation,
    TableTooSmall,
    TruncationTooSmall,
)
from .expsums import kloosterman
from .oscillatory import Bump

__all__ = [
    "TAU3", "FILE", "GL3Form", "CoefficientTable", "tau3_sieve", "langlands_from_nu",
    "nu_from_langlands", "coeff", "hecke_defect", "ramanujan_avg_check",
    "ramanujan_avg_slope", "gamma_factor", "log_gamma_factor", "analytic_conductor",
    "v_cutoff", "v_cutoff_interpolated", "l_value_afe", "dirichlet_series", "VoronoiWeight", "mellin",
    "psi_k", "voronoi_lhs", "voronoi_polar_term", "voronoi_dual_sum", "voronoi_rhs",
    "psi0_asymptotic_check", "D1",
]

TAU3 = "eisenstein-tau3"
FILE = "file"
HEADER = "#gl3-coeffs v1"
D1 = -2 / math.sqrt(3 * math.pi)  # sine coefficient of the leading Psi_0 term
_GL16 = np.polynomial.legendre.leggauss(16)
_GL20 = np.polynomial.legendre.leggauss(20)


# ------------------------------------------------------------- parameters

def langlands_from_nu(nu1: complex, nu2: complex) -> tuple[complex, complex, complex]:
    a1 = -nu1 - 2 * nu2 + 1
    a2 = -nu1 + nu2
    a3 = 2 * nu1 + nu2 - 1
    return a1, a2, a3


def nu_from_langlands(alphas: Sequence[complex]) -> tuple[complex, complex]:
    _, a2, a3 = alphas
    nu1 = (a3 - a2 + 1) / 3
    return nu1, nu1 + a2


def _clean(z: complex) -> complex | float:
    z = complex(z)
    return z.real if z.imag == 0 else z


# ------------------------------------------------------------ coefficients

def tau3_sieve(n_max: int) -> np.ndarray:
    """tau_3(n) for 0 <= n <= n_max (entry 0 is 0).

    tau_3 is multiplicative with tau_3(p^k) = (k + 1)(k + 2)/2; each prime
    power p^k multiplies the entries it divides by (k + 2)/k, which stays
    integral at every step.
    """
    n_max = int(n_max)
    t = np.ones(n_max + 1, dtype=np.int64)
    t[0] = 0
    if n_max < 2:
        return t
    comp = np.zeros(n_max + 1, dtype=bool)
    for p in range(2, math.isqrt(n_max) + 1):
        if not comp[p]:
            comp[p * p::p] = True
    for p in np.flatnonzero(~comp[2:]) + 2:
        pk, k = int(p), 1
        while pk <= n_max:
            t[pk::pk] = t[pk::pk] * (k + 2) // k
            pk *= int(p)
            k += 1
    return t


@dataclass(frozen=True, eq=False)
class CoefficientTable:
    """A(m, n) for 1 <= m, n <= bound.

    The tau_3 model stores tau_3 up to ``bound`` and builds A(m, n) by Hecke
    inversion. A file table stores explicit records; missing entries fall
    back to Hecke inversion from the A(m, 1), A(1, n) records when present.
    """

    bound: int
    provider: str
    tau3: np.ndarray | None = field(default=None, repr=False)
    records: dict | None = field(default=None, repr=False)

    @classmethod
    def tau3_model(cls, bound: int) -> "CoefficientTable":
        return cls(int(bound), TAU3, tau3=tau3_sieve(bound))

    @classmethod
    def from_records(cls, records: dict[tuple[int, int], complex]) -> "CoefficientTable":
        recs = {(int(m), int(n)): complex(v) for (m, n), v in records.items()}
        if recs.get((1, 1)) != 1:
            raise ValueError("A(1,1) must equal 1")
        bound = max(max(m, n) for m, n in recs)
        return cls(bound, FILE, records=recs)

    def get(self, m: int, n: int) -> complex:
        m, n = int(m), int(n)
        if not (1 <= m <= self.bound and 1 <= n <= self.bound):
            raise OutOfRange(f"A({m},{n}) outside the table bound {self.bound}")
        return self._get(m, n)

    @lru_cache(maxsize=1 << 16)
    def _get(self, m: int, n: int) -> complex:
        if self.provider == FILE and (m, n) in self.records:
            return self.records[(m, n)]
        total = 0j
        for d in divisors(math.gcd(m, n)):
            mu = mobius(d)
            if mu:
                total += mu * self._row(m // d) * self._col(n // d)
        return total

    def _row(self, m: int) -> complex:  # A(m, 1)
        if self.provider == TAU3:
            return complex(self.tau3[m])
        if (m, 1) in self.records:
            return self.records[(m, 1)]
        raise OutOfRange(f"A({m},1) missing from the coefficient file")

    def _col(self, n: int) -> complex:  # A(1, n)
        if self.provider == TAU3:
            return complex(self.tau3[n])
        if (1, n) in self.records:
            return self.records[(1, n)]
        raise OutOfRange(f"A(1,{n}) missing from the coefficient file")

    def first_row(self, n_max: int) -> np.ndarray:
        """Array of A(1, n) for n = 1..n_max."""
        if n_max > self.bound:
            raise TableTooSmall(f"need A(1, n) up to {n_max}, table bound is {self.bound}")
        if self.provider == TAU3:
            return self.tau3[1:n_max + 1].astype(np.float64)
        return np.array([self._col(n) for n in range(1, n_max + 1)])

    def first_column(self, n_max: int) -> np.ndarray:
        """Array of A(n, 1) for n = 1..n_max."""
        if n_max > self.bound:
            raise TableTooSmall(f"need A(n, 1) up to {n_max}, table bound is {self.bound}")
        if self.provider == TAU3:
            return self.tau3[1:n_max + 1].astype(np.float64)
        return np.array([self._row(n) for n in range(1, n_max + 1)])

    def column(self, m1: int, n_max: int) -> np.ndarray:
        """Array of A(m2, m1) for m2 = 1..n_max."""
        if n_max > self.bound or m1 > self.bound:
            raise TableTooSmall(f"need A(m2, {m1}) up to m2 = {n_max}, table bound is {self.bound}")
        if m1 == 1:
            return self.first_column(n_max)
        m2 = np.arange(1, n_max + 1)
        if self.provider == TAU3:
            out = np.zeros(n_max, dtype=np.float64)
            for d in divisors(m1):
                mu = mobius(d)
                if mu:
                    sel = m2 % d == 0
                    out[sel] += mu * self.tau3[m2[sel] // d] * self.tau3[m1 // d]
            return out
        return np.array([self.get(int(k), m1) for k in m2])

    def transpose(self) -> "CoefficientTable":
        """Table of the dual form, A~(m, n) = A(n, m)."""
        if self.provider == TAU3:
            return self
        return CoefficientTable(self.bound, FILE, records={(n, m): v for (m, n), v in self.records.items()})


@dataclass(frozen=True, eq=False)
class GL3Form:
    nu: tuple[complex, complex]
    alphas: tuple[complex, complex, complex]
    provider: str
    table: CoefficientTable = field(repr=False)

    def __post_init__(self):
        if abs(sum(self.alphas)) > 1e-12:
            raise ValueError("Langlands parameters must sum to 0")
        if self.table.get(1, 1) != 1:
            raise ValueError("A(1,1) must equal 1")

    @classmethod
    def tau3(cls, bound: int = 10**5) -> "GL3Form":
        nu = (1 / 3, 1 / 3)
        return cls(nu, tuple(_clean(a) for a in langlands_from_nu(*nu)), TAU3,
                   CoefficientTable.tau3_model(bound))

    @classmethod
    def from_file(cls, path: str | Path) -> "GL3Form":
        alphas, records = read_coefficient_file(path)
        return cls(nu_from_langlands(alphas), alphas, FILE, CoefficientTable.from_records(records))

    @property
    def has_pole(self) -> bool:
        return self.provider == TAU3

    @property
    def self_dual(self) -> bool:
        a = self.alphas
        return all(abs(x + y) < 1e-12 for x, y in zip(a, a[::-1]))

    def dual(self) -> "GL3Form":
        a1, a2, a3 = self.alphas
        return GL3Form((self.nu[1], self.nu[0]), (_clean(-a3), _clean(-a2), _clean(-a1)),
                       self.provider, self.table.transpose())


def read_coefficient_file(path: str | Path) -> tuple[tuple, dict]:
    """Parse ``#gl3-coeffs v1 alphas=a1,a2,a3`` followed by ``m n re im`` lines."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith(HEADER):
        raise ValueError(f"missing '{HEADER}' header")
    head = dict(tok.split("=", 1) for tok in lines[0][len(HEADER):].split())
    alphas = tuple(_clean(complex(a)) for a in head["alphas"].split(","))
    if len(alphas) != 3:
        raise ValueError("header must list three Langlands parameters")
    records = {}
    for ln, line in enumerate(lines[1:], start=2):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 4:
            raise ValueError(f"line {ln}: expected 'm n re im'")
        records[(int(parts[0]), int(parts[1]))] = complex(float(parts[2]), float(parts[3]))
    return alphas, records


def write_coefficient_file(path: str | Path, alphas: Sequence[complex],
                           records: dict[tuple[int, int], complex]) -> None:
    head = ",".join(repr(_clean(a)) for a in alphas)
    rows = [f"{HEADER} alphas={head}"]
    rows += [f"{m} {n} {complex(v).real!r} {complex(v).imag!r}" for (m, n), v in sorted(records.items())]
    Path(path).write_text("\n".join(rows) + "\n", encoding="utf-8")


def coeff(m: int, n: int, form: GL3Form) -> complex:
    """A(m, n); deterministic and cached by the table."""
    return form.table.get(m, n)


def hecke_defect(form: GL3Form, bound: int) -> float:
    """max |A(m,1) A(1,n) - sum_{d | (m,n)} A(m/d, n/d)| over m, n <= bound."""
    worst = 0.0
    for m in range(1, bound + 1):
        for n in range(1, bound + 1):
            rhs = sum(coeff(m // d, n // d, form) for d in divisors(math.gcd(m, n)))
            worst = max(worst, abs(coeff(m, 1, form) * coeff(1, n, form) - rhs))
    return worst


@dataclass(frozen=True)
class RamanujanAverage:
    x: float
    total: float
    ratio: float


def _square_sum(x: float, form: GL3Form) -> float:
    total = []
    for m1 in range(1, math.isqrt(int(x)) + 1):
        top = int(x // (m1 * m1))
        if form.provider == TAU3:
            vals = form.table.column(m1, top) if m1 > 1 else form.table.first_row(top)
            total.append(float(np.sum(np.abs(vals) ** 2)))
        else:
            total.append(sum(abs(coeff(m1, m2, form)) ** 2 for m2 in range(1, top + 1)))
    return math.fsum(total)


def ramanujan_avg_check(x: float, form: GL3Form, eps: float = 0.1) -> RamanujanAverage:
    """sum_{m1^2 m2 <= x} |A(m1, m2)|^2 and its ratio to x^{1+eps}."""
    if x > form.table.bound:
        raise TableTooSmall(f"x = {x} exceeds the table bound")
    total = _square_sum(x, form)
    return RamanujanAverage(float(x), total, total / x ** (1 + eps))


def ramanujan_avg_slope(form: GL3Form, xs: Sequence[float]) -> float:
    """Least-squares slope of log(sum |A|^2) against log x."""
    sums = [_square_sum(x, form) for x in xs]
    return float(np.polyfit(np.log(xs), np.log(sums), 1)[0])


# ---------------------------------------------------------- gamma factors

def log_gamma_factor(s, form: GL3Form):
    """log G(F, s) = -(3s/2) log pi + sum_i log Gamma((s - alpha_i)/2)."""
    s = np.asarray(s, dtype=np.complex128)
    out = -1.5 * s * math.log(math.pi)
    for a in form.alphas:
        z = (s - a) / 2
        near = np.abs(z - np.round(z.real)) < 1e-14
        if np.any(near & (np.round(z.real) <= 0)):
            raise PoleEncountered(f"Gamma pole at s = {s[near].ravel()[0]}")
        out = out + loggamma(z)
    return out


def gamma_factor(s, form: GL3Form):
    """G(F, s), evaluated through log-gamma to avoid overflow."""
    val = np.exp(log_gamma_factor(s, form))
    return complex(val) if val.ndim == 0 else val


def analytic_conductor(s: complex, form: GL3Form) -> float:
    """q_inf(s) = prod_i (3 + |s - alpha_i|)."""
    return float(np.prod([3 + abs(s - a) for a in form.alphas]))


# ------------------------------------------------------------ AFE weights

@dataclass(frozen=True)
class _Line:
    c: float
    u: np.ndarray
    w: np.ndarray  # quadrature weight times du/(2 pi i) times G(s+u)/G(s) g(u)


def _line(s: complex, form: GL3Form, c: float, tol: float = 1e-18) -> _Line:
    """Nodes on Re u = c for (1/2 pi i) int y^{-u} G(s+u)/G(s) exp(u^2) du.

    The range in Im u is cut where the integrand's modulus at y = 1 falls
    below ``tol`` times its peak; panel width shrinks when the line passes
    close to the pole of 1/u.
    """
    lg0 = log_gamma_factor(s, form)
    probe = np.arange(-60.0, 60.25, 0.25)
    mag = np.real(log_gamma_factor(s + c + 1j * probe, form) - lg0 + (c + 1j * probe) ** 2)
    keep = np.flatnonzero(mag > mag.max() + math.log(tol))
    if keep[0] == 0 or keep[-1] == probe.size - 1:
        raise QuadratureFailure("gamma ratio does not decay on the contour")
    lo, hi = probe[keep[0]] - 0.5, probe[keep[-1]] + 0.5
    width = min(1.0, abs(c))
    n_pan = int(math.ceil((hi - lo) / width))
    edges = np.linspace(lo, hi, n_pan + 1)
    x, wt = _GL16
    a, b = edges[:-1, None], edges[1:, None]
    v = (0.5 * (b - a) * x + 0.5 * (a + b)).ravel()
    dv = (0.5 * (b - a) * wt).ravel()
    u = c + 1j * v
    kern = np.exp(log_gamma_factor(s + u, form) - lg0 + u * u)
    # du = i dv, so du/(2 pi i) = dv/(2 pi)
    return _Line(c, u, kern * dv / (2 * math.pi))


def _left_shift(s: complex, form: GL3Form) -> float | None:
    gap = min((s - a).real for a in form.alphas)
    return -0.5 * gap if gap > 0 else None


def _candidate_lines(s: complex, form: GL3Form) -> list[float]:
    # moving the line from Re u = 3 must not cross a pole of G(s + u)
    edge = max((a - s).real for a in form.alphas)
    cs = [c for c in (3.0, 2.0, 1.0, 0.5) if c > edge + 0.25] or [3.0]
    left = _left_shift(s, form)
    return cs + ([left] if left is not None else [])


def v_cutoff(y, s: complex, form: GL3Form, derivative: bool = False):
    """V_s(y) = (1/2 pi i) int_(3) y^{-u} G(F, s+u)/G(F, s) exp(u^2) du/u.

    With ``derivative`` the function returns y V_s'(y). Each y is evaluated
    on the line Re u = c that minimizes the size of the integrand,
    y^{-c} |G(s+c)/G(s)| e^{c^2}; lines left of u = 0 (allowed when no gamma
    pole lies in between) collect the residue 1. On Re u = 3 alone, y near 1
    loses about 1e-9 to cancellation.
    """
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    if np.any(y <= 0):
        raise ValueError("y must be positive")
    cs = np.array(_candidate_lines(s, form))
    lg0 = log_gamma_factor(s, form)
    size = np.real(log_gamma_factor(s + cs, form) - lg0) + cs**2 - np.log(np.abs(cs))
    ly_all = np.log(y)
    choice = np.argmin(size[None, :] - np.outer(ly_all, cs), axis=1)
    out = np.empty(y.shape, dtype=np.complex128)
    for j, c in enumerate(cs):
        mask = choice == j
        if not mask.any():
            continue
        ln = _line(s, form, float(c))
        wts = ln.w if derivative else ln.w / ln.u
        sign = -1.0 if derivative else 1.0
        ly = ly_all[mask]
        vals = np.empty(ly.shape, dtype=np.complex128)
        for i in range(0, ly.size, 2048):
            vals[i:i + 2048] = sign * (np.exp(-np.outer(ly[i:i + 2048], ln.u)) @ wts)
        if c < 0 and not derivative:
            vals += 1.0
        out[mask] = vals
    return out if out.size > 1 else complex(out[0])


def v_cutoff_interpolated(y, s: complex, form: GL3Form, panel: float = 0.5, deg: int = 24):
    """V_s(y) for many y through piecewise Chebyshev interpolation in log y.

    V_s(e^w) is entire in w and varies on a scale of order 1, so degree-24
    pieces of width 0.5 reproduce the contour value to roundoff.
    """
    y = np.asarray(y, dtype=np.float64)
    w = np.log(y)
    lo, hi = float(w.min()), float(w.max())
    n_pan = max(1, int(math.ceil((hi - lo) / panel)))
    edges = np.linspace(lo, hi + 1e-12, n_pan + 1)
    half = 0.5 * (edges[1] - edges[0])
    xk = np.cos(np.pi * (np.arange(deg + 1) + 0.5) / (deg + 1))
    mids = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mids[:, None] + half * xk[None, :]).ravel()
    vals = np.asarray(v_cutoff(np.exp(nodes), s, form)).reshape(n_pan, deg + 1)
    coef = np.linalg.solve(np.polynomial.chebyshev.chebvander(xk, deg), vals.T)
    idx = np.clip(((w - lo) / (2 * half)).astype(int), 0, n_pan - 1)
    x = (w - mids[idx]) / half
    return np.polynomial.chebyshev.chebval(x, coef[:, idx], tensor=False)


def _cutoff_length(s: complex, form: GL3Form, tol: float, scale: float = 1.0) -> float:
    """Smallest y_cut with n |V_s(y)| n^{-Re s} (1 + log n)^2 < tol beyond it, n = y scale.

    A term of the AFE sum with weight V_s(n/X) has n = y scale; the squared
    logarithm covers the growth of tau_3-like coefficients.
    """
    ys = np.geomspace(min(1.0, 1 / scale), 1e12, 480)
    n = ys * scale
    # n |term| bounds the tail sum beyond n, since the weights decay faster than any power
    env = np.abs(v_cutoff(ys, s, form)) * n ** (1 - s.real) * (1 + np.log(np.maximum(n, 1.0))) ** 2
    above = np.flatnonzero(env >= tol)
    if above.size == 0:
        return float(ys[0])
    if above[-1] == ys.size - 1:
        raise QuadratureFailure("V_s does not decay within the probed range")
    return float(ys[above[-1] + 1])


@dataclass(frozen=True)
class AFEValue:
    value: complex
    first: complex
    second: complex
    ratio: complex
    pole_term: complex
    n_terms: tuple[int, int]


def _pole_residue(s: complex, X: float, form: GL3Form) -> complex:
    """Residue at u = 1 - s of zeta(s+u)^3 G(s+u)/G(s) exp(u^2) X^u / u."""
    g0, g1 = mpmath.stieltjes(0), mpmath.stieltjes(1)
    s_mp = mpmath.mpc(s)
    lg0 = mpmath.mpc(complex(log_gamma_factor(s, form)))

    def h(u):
        lg = -mpmath.mpf(1.5) * (s_mp + u) * mpmath.log(mpmath.pi)
        for a in form.alphas:
            lg += mpmath.loggamma((s_mp + u - a) / 2)
        return mpmath.exp(lg - lg0 + u * u) * mpmath.power(X, u) / u

    u0 = 1 - s_mp
    h0, h1, h2 = (mpmath.diff(h, u0, k) for k in range(3))
    # zeta(1+w)^3 = w^-3 (1 + 3 g0 w + (3 g0^2 - 3 g1) w^2 + ...)
    return complex(h2 / 2 + 3 * g0 * h1 + (3 * g0**2 - 3 * g1) * h0)


def l_value_afe(t: float, form: GL3Form, length_factor: float = 1.0, *, sigma: float = 0.5,
                X: float = 1.0, tol: float = 1e-6) -> AFEValue:
    """L(F, sigma + it) from the approximate functional equation.

    L(s) = sum A(1,n) n^{-s} V_s(n/X)
           + G(F~, 1-s)/G(F, s) sum A(n,1) n^{s-1} V~_{1-s}(n X) - R,
    R the residue from the pole of L(F, s+u) at u = 1 - s (tau_3 model only).
    Both sums run until the weights fall below ``tol``; ``length_factor``
    scales those lengths.
    """
    if abs(t) < 10:
        raise ValueError("|t| must be at least 10")
    s = complex(sigma, t)
    dual = form.dual()
    n1 = int(math.ceil(length_factor * X * _cutoff_length(s, form, tol, X)))
    n2 = int(math.ceil(length_factor * _cutoff_length(1 - s, dual, tol, 1 / X) / X))
    bound = form.table.bound
    if max(n1, n2) > bound:
        raise TableTooSmall(f"AFE needs {max(n1, n2)} coefficients, table bound is {bound}")
    n = np.arange(1, n1 + 1, dtype=np.float64)
    first = _csum(form.table.first_row(n1) * n ** (-s) * v_cutoff_interpolated(n / X, s, form))
    n = np.arange(1, n2 + 1, dtype=np.float64)
    second = _csum(form.table.first_column(n2).conjugate() * n ** (s - 1)
                   * v_cutoff_interpolated(n * X, 1 - s, dual)) if n2 else 0j
    ratio = complex(np.exp(log_gamma_factor(1 - s, dual) - log_gamma_factor(s, form)))
    pole = _pole_residue(s, X, form) if form.has_pole else 0j
    return AFEValue(first + ratio * second - pole, first, second, ratio, pole, (n1, n2))


def _csum(z) -> complex:
    z = np.asarray(z, dtype=np.complex128).ravel()
    return complex(math.fsum(z.real), math.fsum(z.imag))


def dirichlet_series(s: complex, form: GL3Form, n_max: int, n_fit: int = 40) -> complex:
    """sum_n A(1,n) n^{-s} for Re s > 1, by partial sums plus a fitted tail.

    With D(x) = sum_{n <= x} A(1,n), Abel summation gives
    sum_{n > N} A(1,n) n^{-s} = -D(N) N^{-s} + N^{1-s} Q(log N) + small,
    Q a polynomial of degree (pole order - 1). The constant term and Q are
    fitted by least squares over N in [n_max/10, n_max].
    """
    if s.real <= 1:
        raise ValueError("the Dirichlet series needs Re s > 1")
    a = form.table.first_row(n_max)
    n = np.arange(1, n_max + 1, dtype=np.float64)
    terms = a * n ** (-complex(s))
    partial_re = np.cumsum(terms.real)
    partial_im = np.cumsum(terms.imag)
    D = np.cumsum(a)
    Ns = np.unique(np.geomspace(n_max / 10, n_max, n_fit).astype(int))
    idx = Ns - 1
    T = partial_re[idx] + 1j * partial_im[idx] - D[idx] * Ns ** (-complex(s))
    order = 3 if form.has_pole else 0
    L = np.log(Ns)
    cols = [np.ones_like(L, dtype=complex)] + [Ns ** (1 - complex(s)) * L**j for j in range(order)]
    M = np.stack(cols, axis=1)
    # T(N) = L - N^{1-s} Q(log N): the fitted constant is the series value.
    coef, *_ = np.linalg.lstsq(M, T, rcond=None)
    return complex(coef[0])


# --------------------------------------------------------------- Voronoi

@dataclass(frozen=True)
class VoronoiWeight:
    """Smooth weight on [Y, 2Y]: Bump(Y, 2Y, beta, gamma), optionally chirped.

    ``chirp`` multiplies by e(chirp(y)). The default gamma = 30 gives a
    Mellin transform that is Gaussian-like in Im s down to ~1e-13.
    """

    Y: float
    beta: float = 1.0
    gamma: float = 30.0
    scale: float = 1.0
    chirp: Callable | None = None

    @property
    def support(self) -> tuple[float, float]:
        return self.Y, 2 * self.Y

    def __call__(self, y):
        y = np.asarray(y, dtype=np.float64)
        out = self.scale * Bump(self.Y, 2 * self.Y, self.beta, self.gamma)(y)
        if self.chirp is not None:
            out = out * np.exp(2j * np.pi * np.asarray(self.chirp(y)))
        return out


def _log_nodes(psi, n_panels: int = 64):
    lo, hi = psi.support
    edges = np.linspace(math.log(lo), math.log(hi), n_panels + 1)
    x, w = _GL20
    a, b = edges[:-1, None], edges[1:, None]
    v = (0.5 * (b - a) * x + 0.5 * (a + b)).ravel()
    dv = (0.5 * (b - a) * w).ravel()
    return v, dv * np.asarray(psi(np.exp(v)), dtype=np.complex128)


def mellin(psi, w, n_panels: int = 64):
    """psi~(w) = int psi(y) y^w dy/y, by Gauss-Legendre in log y."""
    v, pw = _log_nodes(psi, n_panels)
    v0 = math.log(psi.support[0])  # factor out Y^w to keep phases small
    w = np.atleast_1d(np.asarray(w, dtype=np.complex128))
    out = np.empty(w.shape, dtype=np.complex128)
    for i in range(0, w.size, 1024):
        out[i:i + 1024] = np.exp(np.outer(w[i:i + 1024], v - v0)) @ pw
    return out * np.exp(w * v0)


def _gamma_ratio_log(s, k: int, alphas):
    out = 0
    for a in alphas:
        out = out + loggamma((1 + s + 2 * k + a) / 2) - loggamma((-s - a) / 2)
    return out


@dataclass(frozen=True)
class _Contour:
    s: np.ndarray
    c: np.ndarray  # i h * Gamma ratio * psi~(-s-k)


@lru_cache(maxsize=64)
def _contour(psi, k: int, alphas: tuple, sigma: float, h: float, cap: float) -> _Contour:
    coarse = np.arange(-cap, cap + 1.0, 1.0)
    sc = sigma + 1j * coarse
    mag = np.abs(np.exp(_gamma_ratio_log(sc, k, alphas)) * mellin(psi, -sc - k))
    if mag.max() == 0:
        return _Contour(np.zeros(0, dtype=complex), np.zeros(0, dtype=complex))
    # Walk outward from the peak to the first run of 20 points below the
    # threshold; farther out only amplified roundoff in psi~ remains. The
    # outer half of the scan measures that roundoff floor.
    floor = float(np.median(mag[np.abs(coarse) > cap / 2]))
    small = mag < max(1e-14 * mag.max(), 100 * floor)
    run = np.convolve(small, np.ones(20, dtype=int), mode="valid") == 20
    top = int(np.argmax(mag))
    right = np.flatnonzero(run[top:])
    left = np.flatnonzero(run[:max(top - 19, 0)])
    if right.size == 0 or left.size == 0:
        raise ContourFailure("Mellin integrand does not decay within |Im s| <= cap")
    lo, hi = coarse[left[-1] + 19], coarse[top + right[0]]
    tau = np.arange(lo - 5, hi + 5 + h / 2, h)
    s = sigma + 1j * tau
    c = 1j * h * np.exp(_gamma_ratio_log(s, k, alphas)) * mellin(psi, -s - k)
    return _Contour(s, c)


def psi_k(x, psi, k: int, alphas=(0, 0, 0), sigma: float | None = None, h: float = 0.05,
          cap: float = 1000.0):
    """Psi_k(x) = int_(sigma) (pi^3 x)^{-s} prod Gamma((1+s+2k+a_i)/2)/Gamma((-s-a_i)/2)
    psi~(-s-k) ds, with ds = i d(Im s) and no 1/(2 pi i).

    The trapezoidal rule in Im s with step h converges geometrically since the
    integrand is analytic in a strip around the line. The default
    sigma = -0.4 - k keeps the gamma ratio nearly flat
    (|Im s|^{3(sigma + k + 1/2)}) so roundoff in psi~ is not amplified.
    """
    if sigma is None:
        sigma = -0.4 - k
    if not -1 - 2 * k < sigma:
        raise ValueError("sigma must lie right of the first gamma pole")
    ct = _contour(psi, int(k), tuple(complex(a) for a in alphas), float(sigma), float(h), float(cap))
    lx = np.log(math.pi**3 * np.atleast_1d(np.asarray(x, dtype=np.float64)))
    out = np.empty(lx.shape, dtype=np.complex128)
    for i in range(0, lx.size, 256):
        out[i:i + 256] = np.exp(-np.outer(lx[i:i + 256], ct.s)) @ ct.c
    return out


def voronoi_lhs(q: int, abar: int, psi, form: GL3Form) -> complex:
    """sum_m A(1, m) e(m abar / q) psi(m)."""
    if math.gcd(abar, q) != 1:
        raise ValueError("abar must be a unit mod q")
    lo, hi = psi.support
    top = int(math.floor(hi))
    if top > form.table.bound:
        raise TableTooSmall(f"psi support reaches {top}, table bound is {form.table.bound}")
    m = np.arange(max(1, int(math.ceil(lo))), top + 1)
    tw = root_table(q)[(m * abar) % q]
    return _csum(form.table.first_row(top)[m - 1] * tw * psi(m))


def voronoi_polar_term(q: int, abar: int, psi, form: GL3Form, nodes: int = 48,
                       radius: float = 0.4) -> complex:
    """Residue at w = 1 of D(w) psi~(w), D(w) = sum tau_3(m) e(m abar/q) m^{-w}.

    D(w) = q^{-3w} sum_{b mod q} e(abar b1 b2 b3/q) prod zeta(w, b_i/q), so
    the residue is a contour integral around w = 1 using Hurwitz zeta.
    """
    if not form.has_pole:
        return 0j
    theta = 2 * np.pi * np.arange(nodes) / nodes
    w = 1 + radius * np.exp(1j * theta)
    b = np.arange(1, q + 1)
    prod = (abar * b[:, None, None] * b[None, :, None] * b[None, None, :]) % q
    ph = root_table(q)[prod]
    mel = mellin(psi, w)
    total = 0j
    for wk, mk, tk in zip(w, mel, theta):
        z = np.array([complex(mpmath.zeta(wk, bb / q)) for bb in b])
        D = q ** (-3 * wk) * np.einsum("ijk,i,j,k->", ph, z, z, z)
        total += D * mk * radius * np.exp(1j * tk)
    return total / nodes


@dataclass(frozen=True)
class DualSum:
    value: complex
    truncation: dict[int, int]
    last_term: float


@lru_cache(maxsize=32)
def _truncation(psi, alphas: tuple, rel: float) -> tuple[float, float]:
    """x beyond which the dual-sum weight |Psi_0(x)| + |Psi_1(x)|/(pi^3 x)
    stays below rel times its peak, and the peak of |Psi_0|."""
    xs = np.geomspace(1e-6, 1e8, 600) / psi.support[0]
    p0 = np.abs(psi_k(xs, psi, 0, alphas))
    mag = p0 + np.abs(psi_k(xs, psi, 1, alphas)) / (math.pi**3 * xs)
    if mag.max() == 0:
        return 0.0, 1.0
    # first x past the peak from which the weight stays below rel for 10 samples
    small = mag < rel * mag.max()
    run = np.convolve(small, np.ones(10, dtype=int), mode="valid") == 10
    top = int(np.argmax(mag))
    past = np.flatnonzero(run[top:])
    if past.size == 0:
        raise ContourFailure("Psi_k does not decay within the probed range")
    return float(xs[top + past[0]]), float(p0.max())


@lru_cache(maxsize=32)
def _dual_weights(psi, alphas: tuple, q: int, m1: int, M: int):
    x = np.arange(1, M + 1) * m1**2 / q**3
    return psi_k(x, psi, 0, alphas), psi_k(x, psi, 1, alphas)


def voronoi_dual_sum(q: int, a: int, psi, form: GL3Form, truncation: float | None = None,
                     rel: float = 1e-10) -> DualSum:
    """(q pi^{-5/2}/(4i)) sum_pm sum_{m1 | q} sum_{m2 <= M} A(m2, m1)/(m1 m2)
    S(a, pm m2; q/m1) Psi_{0,1}^pm(m2 m1^2/q^3).

    ``truncation`` caps x = m2 m1^2/q^3; by default it is where Psi_k has
    fallen below ``rel`` of its peak.
    """
    if math.gcd(a, q) != 1:
        raise ValueError("a must be a unit mod q")
    cut, peak = _truncation(psi, tuple(form.alphas), rel)
    x_cut = cut if truncation is None else float(truncation)
    total = 0j
    cuts = {}
    last = 0.0
    for m1 in divisors(q):
        c = q // m1
        M = int(math.floor(x_cut * q**3 / m1**2))
        cuts[m1] = M
        if M < 1:
            continue
        m2 = np.arange(1, M + 1)
        p0, p1 = _dual_weights(psi, tuple(form.alphas), q, m1, M)
        last = max(last, float(abs(p0[-1])) / peak)
        A = form.table.column(m1, M)
        kl_p = np.array([kloosterman(a, r, c).value.real for r in range(c)])
        kl_m = np.array([kloosterman(a, -r, c).value.real for r in range(c)])
        corr = math.pi**-3 * q**3 / (m1**2 * m2 * 1j) * p1
        base = A / (m1 * m2)
        total += _csum(base * kl_p[m2 % c] * (p0 + corr)) + _csum(base * kl_m[m2 % c] * (p0 - corr))
    if last > 1e-6:
        raise TruncationTooSmall(f"last retained |Psi_0| is {last:.2e} of its peak")
    return DualSum(q * math.pi**-2.5 / 4j * total, cuts, last)


def voronoi_rhs(q: int, a: int, psi, form: GL3Form, truncation: float | None = None) -> complex:
    """Dual side of the Voronoi formula, including the polar term of the tau_3 model."""
    abar = mod_inverse(a, q) if q > 1 else 0
    return voronoi_dual_sum(q, a, psi, form, truncation).value + voronoi_polar_term(q, abar, psi, form)


@dataclass(frozen=True)
class Psi0Check:
    rel_error: float
    exact: complex
    asymptotic: complex
    xY: float


def psi0_asymptotic_check(x: float, psi, K: int = 1, alphas=(0, 0, 0)) -> Psi0Check:
    """Leading term 2 pi^4 x i int psi(y) d_1 sin(6 pi (xy)^{1/3}) (pi^3 xy)^{-1/3} dy
    against the contour value of Psi_0(x).

    Only K = 1 is implemented: the higher coefficients are not known in
    closed form.
    """
    if K != 1:
        raise ValueError("only the leading term (K = 1) is available")
    Y = psi.support[0]
    if x * Y < 100:
        raise RegimeViolation(f"x Y = {x * Y:.3g} < 100")
    v, pw = _log_nodes(psi, 128)
    y = np.exp(v)
    integrand = pw * y * D1 * np.sin(6 * math.pi * np.cbrt(x * y)) / np.cbrt(math.pi**3 * x * y)
    asym = 2j * math.pi**4 * x * _csum(integrand)
    exact = complex(psi_k(np.array([x]), psi, 0, alphas)[0])
    if exact == 0 and asym == 0:
        return Psi0Check(0.0, 0j, 0j, x * Y)
    return Psi0Check(abs(asym - exact) / abs(exact), exact, asym, x * Y)
