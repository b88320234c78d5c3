"""Oscillatory integrals: quadrature oracle, stationary-phase main terms and
the concrete phase families arising after Voronoi and Poisson summation.

Throughout, e(x) = exp(2 pi i x) and integrals have the form
int g(x) e(f(x)) dx with g smooth and compactly supported.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from .errors import (
    BudgetExceeded,
    ConditionViolation,
    DegenerateConfiguration,
    DegenerateHessian,
    MultipleStationaryPoints,
    NoStationaryPoint,
    StationaryPointPresent,
    ZeroLeadingCoefficient,
)

__all__ = [
    "Bump",
    "DECAY_WINDOW",
    "poisson_h_center",
    "PhaseDescriptor",
    "OscillatoryResult",
    "CubicRootPhase",
    "CubicAnalysis",
    "FamilyData",
    "IPhaseData",
    "quad_oscillatory_1d",
    "quad_oscillatory_2d",
    "find_stationary_point",
    "bky_main_term",
    "bky_conditions",
    "first_derivative_bound",
    "hormander_2d_main_term",
    "phase_voronoi_m",
    "phase_voronoi_n",
    "phase_poisson_h",
    "phase_J",
    "phase_I_2d",
    "cubic_phase_analysis",
]

EVAL_BUDGET = 10**7
DECAY_WINDOW = {"beta": 2.0, "gamma": 12.0}
_EPS = np.finfo(float).eps
TWO_PI = 2 * math.pi

# 15-point Gauss-Kronrod rule with its embedded 7-point Gauss rule (QUADPACK).
_XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0])
_WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327])

_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])  # 15 nodes, increasing
_WK = np.concatenate([_WGK[:-1], _WGK[::-1]])
_WG15 = np.zeros(15)
_WG15[[1, 3, 5]] = _WG[:3]
_WG15[7] = _WG[3]
_WG15[[9, 11, 13]] = _WG[2::-1]


def e(x):
    """exp(2 pi i x), elementwise."""
    return np.exp(TWO_PI * 1j * np.asarray(x, dtype=np.float64))


@dataclass(frozen=True)
class Bump:
    """exp(-gamma s^2 - beta s^2/(1 - s^2)) on (lo, hi), s the affine image in (-1, 1).

    The value at the centre is 1. The Gaussian factor gamma narrows the
    bump without sharpening its edges; ``DECAY_WINDOW`` (gamma = 12,
    beta = 2) keeps the Fourier transform below 1e-7 of the mass beyond
    9 cycles across the support.
    """

    lo: float
    hi: float
    beta: float = 1.0
    gamma: float = 0.0

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        s = (2 * x - (self.lo + self.hi)) / (self.hi - self.lo)
        out = np.zeros_like(s)
        inside = np.abs(s) < 1
        si = s[inside]
        s2 = si * si
        out[inside] = np.exp(-self.gamma * s2 - self.beta * s2 / (1 - s2))
        return out

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def scale(self) -> float:
        """Length scale on which derivatives vary."""
        return self.width / (2 * max(1.0, math.sqrt(self.beta + self.gamma)))


def _central_d1(f, x, h):
    return (f(x + h) - f(x - h)) / (2 * h)


def _central_d2(f, x, h):
    return (f(x + h) - 2 * f(x) + f(x - h)) / (h * h)


def _fourth_order_d2(f, x, h):
    return (-f(x + 2 * h) + 16 * f(x + h) - 30 * f(x) + 16 * f(x - h) - f(x - 2 * h)) / (12 * h * h)


@dataclass(frozen=True)
class PhaseDescriptor:
    """Phase f, amplitude g and the scale parameters of the integral.

    ``g`` must vanish outside ``support``; ``amplitude`` enforces it.
    Scale conventions: f^(j) << theta_f omega_f^-j, g^(j) << theta_g omega_g^-j.
    """

    f: Callable
    g: Callable
    support: tuple[float, float]
    df: Callable | None = None
    d2f: Callable | None = None
    theta_f: float = 1.0
    omega_f: float = 1.0
    theta_g: float = 1.0
    omega_g: float = 1.0

    @property
    def L(self) -> float:
        return self.support[1] - self.support[0]

    @property
    def Z(self) -> float:
        return self.omega_f + self.theta_f + self.theta_g + self.L + 1

    def amplitude(self, x):
        x = np.asarray(x, dtype=np.float64)
        a, b = self.support
        return np.where((x >= a) & (x <= b), self.g(x), 0.0)

    def fprime(self, x):
        if self.df is not None:
            return self.df(np.asarray(x, dtype=np.float64))
        return _central_d1(self.f, np.asarray(x, dtype=np.float64), _EPS ** (1 / 3) * self.omega_f)

    def fsecond(self, x):
        if self.d2f is not None:
            return self.d2f(np.asarray(x, dtype=np.float64))
        return _fourth_order_d2(self.f, np.asarray(x, dtype=np.float64), _EPS ** (1 / 6) * self.omega_f)

    def check_second_derivative(self, rng: np.random.Generator, n: int = 10,
                                rtol: float = 1e-5) -> float:
        """Max relative gap between supplied f'' and a finite difference."""
        a, b = self.support
        x = rng.uniform(a + 0.05 * self.L, b - 0.05 * self.L, n)
        h = _EPS ** (1 / 6) * self.omega_f
        fd = _fourth_order_d2(self.f, x, h)
        ref = np.asarray(self.fsecond(x))
        gap = float(np.max(np.abs(ref - fd) / np.maximum(np.abs(ref), 1e-300)))
        if gap > rtol:
            raise ValueError(f"supplied f'' disagrees with finite differences ({gap:.2e})")
        return gap


@dataclass(frozen=True)
class OscillatoryResult:
    value: complex
    err: float
    method: str  # quadrature | bky-main | hormander-main | first-derivative-bound | negligible
    flags: dict = field(default_factory=dict)
    n_evals: int = 0

    def __post_init__(self):
        if not math.isfinite(self.err) or self.err < 0:
            raise ValueError("err must be finite and nonnegative")
        if self.method == "negligible" and self.value != 0:
            raise ValueError("negligible results carry value 0")


# ---------------------------------------------------------------- quadrature

def _gk_panels(func, a: np.ndarray, b: np.ndarray):
    """K15 and G7 estimates on each panel [a_i, b_i]; func is vectorized."""
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    x = mid[:, None] + half[:, None] * _NODES[None, :]
    vals = np.broadcast_to(func(x), x.shape)
    k = half * (vals @ _WK)
    g = half * (vals @ _WG15)
    return k, g, x


def _adaptive(func, a: float, b: float, tol: float, budget: int,
              phase: Callable | None = None, n0: int = 16, max_cycles: float = 0.5):
    """Adaptive Gauss-Kronrod over [a, b] with an optional phase criterion.

    A panel is accepted once |K15 - G7| is within its share of ``tol`` and,
    when ``phase`` is given, the phase varies by at most ``max_cycles``
    across its nodes.
    """
    total_len = b - a
    edges = np.linspace(a, b, n0 + 1)
    lo, hi = edges[:-1], edges[1:]
    acc_val = []
    acc_err = []
    n_evals = 0
    min_width = 64 * _EPS * max(abs(a), abs(b), total_len)
    while lo.size:
        n_evals += 15 * lo.size
        k, g, x = _gk_panels(func, lo, hi)
        err = np.abs(k - g)
        width = hi - lo
        ok = err <= tol * width / total_len
        if phase is not None:
            nodes = np.concatenate([lo[:, None], x, hi[:, None]], axis=1)
            ph = np.broadcast_to(np.asarray(phase(nodes), dtype=np.float64), nodes.shape)
            var = np.sum(np.abs(np.diff(ph, axis=1)), axis=1)
            ok &= var <= max_cycles
        ok |= width <= min_width
        acc_val.append(k[ok])
        acc_err.append(err[ok])
        lo, hi = lo[~ok], hi[~ok]
        if lo.size and n_evals > budget:
            partial = complex(math.fsum(np.concatenate(acc_val).real) + k[~ok].real.sum(),
                              math.fsum(np.concatenate(acc_val).imag) + k[~ok].imag.sum())
            raise BudgetExceeded(
                f"quadrature exceeded {budget} evaluations with {lo.size} panels pending",
                partial=OscillatoryResult(partial, float(np.concatenate(acc_err).sum() + err[~ok].sum()),
                                          "quadrature", {"partial": True}, n_evals))
        mid = 0.5 * (lo + hi)
        lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])
    vals = np.concatenate(acc_val)
    errs = np.concatenate(acc_err)
    value = complex(math.fsum(vals.real), math.fsum(vals.imag))
    return value, float(errs.sum()), n_evals


def quad_oscillatory_1d(p: PhaseDescriptor, tol: float = 1e-10,
                        budget: int = EVAL_BUDGET) -> OscillatoryResult:
    """int g(x) e(f(x)) dx over the support, to absolute tolerance ``tol``.

    Panels are refined until the phase varies by at most half a cycle
    across each and the Kronrod error estimate meets the tolerance.
    """
    a, b = p.support
    if not (math.isfinite(a) and math.isfinite(b) and a < b):
        raise ValueError("support must be a bounded interval")

    def integrand(x):
        return p.amplitude(x) * e(p.f(x))

    value, err, n = _adaptive(integrand, a, b, tol, budget, phase=p.f)
    return OscillatoryResult(value, err, "quadrature", n_evals=n)


def quad_oscillatory_2d(f: Callable, u: Callable, box: Sequence[tuple[float, float]],
                        lam: float = 1.0, tol: float = 1e-9,
                        budget: int = EVAL_BUDGET) -> OscillatoryResult:
    """Iterated adaptive quadrature of int int u(x, y) e(lam f(x, y)) dx dy.

    The inner y-integral uses the phase criterion; the outer x-integral
    is adaptive on the (smooth) inner result.
    """
    (x0, x1), (y0, y1) = box
    used = [0]

    def inner_one(x: float) -> complex:
        def integrand(y):
            return u(x, y) * e(lam * f(x, y))
        val, _, n = _adaptive(integrand, y0, y1, tol / (x1 - x0), budget - used[0],
                              phase=lambda y: lam * f(x, y))
        used[0] += n
        return val

    def outer(xs):
        flat = xs.ravel()
        out = np.array([inner_one(float(x)) for x in flat])
        return out.reshape(xs.shape)

    try:
        value, err, _ = _adaptive(outer, x0, x1, tol, budget, n0=8)
    except BudgetExceeded as exc:
        raise BudgetExceeded(str(exc), partial=exc.partial) from None
    return OscillatoryResult(value, err, "quadrature", n_evals=used[0])


# ---------------------------------------------------------- stationary phase

def find_stationary_point(p: PhaseDescriptor, n_grid: int = 4001) -> float:
    """Unique zero of f' inside the support, located by sign scan + Brent."""
    a, b = p.support
    x = np.linspace(a, b, n_grid)
    d = np.asarray(p.fprime(x))
    sign = np.sign(d)
    zeros = np.flatnonzero(sign == 0)
    flips = np.flatnonzero(sign[:-1] * sign[1:] < 0)
    roots = [float(x[i]) for i in zeros]
    for i in flips:
        roots.append(optimize.brentq(lambda t: float(p.fprime(t)), x[i], x[i + 1],
                                     xtol=1e-15 * max(1.0, abs(x[i])), rtol=4 * _EPS, maxiter=200))
    roots = sorted(set(roots))
    if not roots:
        raise NoStationaryPoint("f' keeps one sign on the support")
    if len(roots) > 1:
        raise MultipleStationaryPoints(f"f' vanishes at {roots}")
    return roots[0]


def bky_conditions(p: PhaseDescriptor, delta: float = 0.09) -> dict:
    """Check Theta_f >= Z^(3 delta) and L >= Omega_g >= Omega_f Z^(delta/2) / sqrt(Theta_f)."""
    Z = p.Z
    c1 = p.theta_f >= Z ** (3 * delta)
    c2 = p.L >= p.omega_g
    c3 = p.omega_g >= p.omega_f * Z ** (delta / 2) / math.sqrt(p.theta_f)
    return {"theta_f_large": bool(c1), "support_covers_omega_g": bool(c2),
            "omega_g_large": bool(c3), "ok": bool(c1 and c2 and c3), "Z": Z, "delta": delta}


def bky_main_term(p: PhaseDescriptor, n_terms: int = 1, delta: float = 0.09,
                  x0: float | None = None) -> OscillatoryResult:
    """Leading stationary-phase terms e(f(x0)) sum_{n < n_terms} p_n / sqrt(f''(x0)).

    p_n = e^{pi i/4}/n! (i/(4 pi f''))^n G^(2n)(x0), with
    G(x) = g(x) e(f(x) - f(x0) - f''(x0)(x - x0)^2/2); the principal square
    root of f'' handles both signs. G'' uses fourth-order central differences.
    """
    if n_terms not in (1, 2):
        raise ValueError("n_terms must be 1 or 2")
    if x0 is None:
        x0 = find_stationary_point(p)
    cond = bky_conditions(p, delta)
    if not cond["ok"]:
        warnings.warn(ConditionViolation(f"stationary-phase conditions fail: {cond}"), stacklevel=2)
    f0 = float(p.f(np.float64(x0)))
    f2 = float(p.fsecond(np.float64(x0)))
    if f2 == 0:
        raise NoStationaryPoint("degenerate stationary point (f'' = 0)")
    root = np.sqrt(complex(f2))
    phase0 = np.exp(0.25j * math.pi)
    g0 = complex(p.amplitude(np.float64(x0)))
    terms = [phase0 * g0]
    if n_terms == 2:
        def G(x):
            return p.amplitude(x) * e(p.f(x) - f0 - f2 * (x - x0) ** 2 / 2)
        h = _EPS ** (1 / 6) * min(p.omega_f, p.omega_g)
        g2 = complex(_fourth_order_d2(G, np.float64(x0), h))
        terms.append(phase0 * (1j / (4 * math.pi * f2)) * g2)
    value = complex(e(f0)) * sum(terms) / root
    err = abs(value) / p.theta_f ** n_terms
    return OscillatoryResult(value, err, "bky-main",
                             flags={"conditions": cond, "x0": x0, "f_x0": f0, "f2_x0": f2})


def first_derivative_bound(p: PhaseDescriptor, n_grid: int = 4001,
                           threshold: float = 1e-12) -> float:
    """2/Lambda with Lambda = min |f'| on the support.

    This bounds |int_a^b e(f(x)) dx| when f' is monotone (unit amplitude);
    the descriptor's amplitude is not used.
    """
    a, b = p.support
    x = np.linspace(a, b, n_grid)
    d = np.abs(np.asarray(p.fprime(x)))
    i = int(np.argmin(d))
    lam = float(d[i])
    lo, hi = x[max(i - 1, 0)], x[min(i + 1, n_grid - 1)]
    if hi > lo:
        res = optimize.minimize_scalar(lambda t: abs(float(p.fprime(t))), bounds=(lo, hi),
                                       method="bounded", options={"xatol": 1e-14 * max(1.0, abs(lo))})
        lam = min(lam, float(res.fun))
    scale = float(np.max(d)) if np.max(d) > 0 else 1.0
    if lam <= threshold * scale or lam == 0:
        raise StationaryPointPresent(f"min |f'| = {lam:.3g} on the support")
    return 2.0 / lam


# ---------------------------------------------------------------- 2-d main term

def _grad_fd(f, x, h):
    x = np.asarray(x, dtype=float)
    return np.array([(f(x[0] + h[0], x[1]) - f(x[0] - h[0], x[1])) / (2 * h[0]),
                     (f(x[0], x[1] + h[1]) - f(x[0], x[1] - h[1])) / (2 * h[1])])


def _hess_fd(f, x, h):
    x0, y0 = float(x[0]), float(x[1])
    hx, hy = h
    fxx = _fourth_order_d2(lambda t: f(t, y0), x0, hx)
    fyy = _fourth_order_d2(lambda t: f(x0, t), y0, hy)
    fxy = (f(x0 + hx, y0 + hy) - f(x0 + hx, y0 - hy) - f(x0 - hx, y0 + hy)
           + f(x0 - hx, y0 - hy)) / (4 * hx * hy)
    return np.array([[fxx, fxy], [fxy, fyy]], dtype=float)


def _newton_2d(f, grad, hess, seeds, box, tol=1e-10, max_iter=60):
    (a0, a1), (b0, b1) = box
    span = np.array([a1 - a0, b1 - b0])
    found = []
    for s in seeds:
        x = np.array(s, dtype=float)
        for _ in range(max_iter):
            gvec = grad(x)
            H = hess(x)
            try:
                step = np.linalg.solve(H, gvec)
            except np.linalg.LinAlgError:
                break
            t = 1.0
            # damp steps that would leave the box
            while t > 1e-4:
                xn = x - t * step
                if a0 <= xn[0] <= a1 and b0 <= xn[1] <= b1:
                    break
                t *= 0.5
            else:
                break
            x = xn
            if np.all(np.abs(t * step) <= tol * np.maximum(span, np.abs(x))):
                found.append(x.copy())
                break
    return found


def hormander_2d_main_term(f: Callable, u: Callable, lam: float,
                           box: Sequence[tuple[float, float]],
                           grad: Callable | None = None, hess: Callable | None = None,
                           n_seed: int = 8) -> OscillatoryResult:
    """u(x0) e(lam f(x0)) e^{i pi sgn/4} / (lam sqrt|det H|) at the stationary point.

    For a saddle (det H < 0) this is u(x0) e(lam f(x0)) / (lam sqrt(-det H));
    for definite Hessians the square root of -det H takes the branch fixed
    by the signature sgn = +-2.
    """
    (a0, a1), (b0, b1) = box
    h = (_EPS ** (1 / 6) * (a1 - a0), _EPS ** (1 / 6) * (b1 - b0))
    if grad is None:
        grad = lambda x: _grad_fd(f, x, (_EPS ** (1 / 3) * (a1 - a0), _EPS ** (1 / 3) * (b1 - b0)))  # noqa: E731
    if hess is None:
        hess = lambda x: _hess_fd(f, x, h)  # noqa: E731
    gx = a0 + (np.arange(n_seed) + 0.5) * (a1 - a0) / n_seed
    gy = b0 + (np.arange(n_seed) + 0.5) * (b1 - b0) / n_seed
    seeds = [(x, y) for x in gx for y in gy]
    found = _newton_2d(f, grad, hess, seeds, box)
    interior = [x for x in found if a0 < x[0] < a1 and b0 < x[1] < b1]
    if not interior:
        raise NoStationaryPoint("Newton found no interior stationary point")
    x0 = interior[0]
    span = np.array([a1 - a0, b1 - b0])
    distinct = [x0]
    for x in interior[1:]:
        if all(np.any(np.abs(x - y) > 1e-7 * span) for y in distinct):
            distinct.append(x)
    if len(distinct) > 1:
        raise MultipleStationaryPoints(f"stationary points at {[tuple(d) for d in distinct]}")
    H = np.asarray(hess(x0), dtype=float)
    det = float(np.linalg.det(H))
    scale = float(np.max(np.abs(H))) ** 2
    if abs(det) <= 1e-12 * scale:
        raise DegenerateHessian(f"det H = {det:.3g}")
    eig = np.linalg.eigvalsh(H)
    sgn = int(np.sum(eig > 0) - np.sum(eig < 0))
    u0 = complex(np.asarray(u(x0[0], x0[1])))
    f0 = float(np.asarray(f(x0[0], x0[1])))
    value = u0 * complex(e(lam * f0)) * np.exp(0.25j * math.pi * sgn) / (lam * math.sqrt(abs(det)))
    return OscillatoryResult(value, abs(value) / lam, "hormander-main",
                             flags={"x0": tuple(float(t) for t in x0), "f_x0": f0, "det": det,
                                    "signature": sgn})


# ------------------------------------------------------------ phase families

@dataclass(frozen=True)
class FamilyData:
    descriptor: PhaseDescriptor
    x0: float | None
    f_x0: float | None
    f2_x0: float | None
    in_window: bool
    window: dict = field(default_factory=dict)


def _amplitude_mass(g: Callable, a: float, b: float) -> float:
    edges = np.linspace(a, b, 65)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (edges[1] - edges[0])
    x = mid[:, None] + half * _NODES[None, :]
    return float(half * np.sum(np.abs(g(x)) @ _WK))


def phase_voronoi_m(T: float, r: float, xi: float, q: float, mterm: float, n: float,
                    h: float, Q: float, x: float = 0.0, beta: float = 1.0, gamma: float = 0.0) -> FamilyData:
    """u-integral after m-Voronoi, with u -> Q^2 u + n + h on u in [1, 2]:

        int W(u) (Q^2 u + n + h)^(-1/3) e(x Q u / q + 3 mterm^(1/3) (Q^2 u + n + h)^(1/3) / q) du.

    f' = x Q/q + kappa (1 + Q^2 u/(n+h))^(-2/3) never vanishes for x >= 0;
    kappa = mterm^(1/3) Q^2 / (q (n+h)^(2/3)) is the window variable and the
    integral is negligible once kappa >> 1.
    """
    if min(T, q, Q, n + h) <= 0 or mterm < 0:
        raise ValueError("parameters must be positive")
    c = mterm ** (1 / 3)
    base = n + h
    W = Bump(1.0, 2.0, beta, gamma)

    def f(u):
        return x * Q * u / q + 3 * c * np.cbrt(Q * Q * u + base) / q

    def df(u):
        return x * Q / q + c * Q * Q * np.cbrt(Q * Q * u + base) ** -2 / q

    def d2f(u):
        return -(2.0 / 3.0) * c * Q**4 * np.cbrt(Q * Q * u + base) ** -5 / q

    def g(u):
        return W(u) * np.cbrt(Q * Q * u + base) ** -1

    kappa = c * Q * Q / (q * base ** (2 / 3))
    desc = PhaseDescriptor(f, g, (1.0, 2.0), df, d2f,
                           theta_f=max(kappa, 1e-300) + abs(x) * Q / q, omega_f=1.0,
                           theta_g=float(np.cbrt(Q * Q + base) ** -1), omega_g=W.scale)
    window = {"kappa": kappa, "truncation": (T / Q) ** 3, "mterm_over_truncation": mterm / (T / Q) ** 3,
              "trivial_bound": _amplitude_mass(g, 1.0, 2.0)}
    return FamilyData(desc, None, None, None, in_window=kappa <= 1.0, window=window)


def phase_voronoi_n(T: float, r: float, xi: float, q: float, h: float, mterm: float,
                    nterm: float, N: float | None = None, beta: float = 1.0, gamma: float = 0.0) -> FamilyData:
    """u-integral after n-Voronoi,

        int u^(-1/3) V(u/N) e(A h / u + 3 D u^(1/3) / q) du,

    with A = (T + r xi)/(2 pi), D = nterm^(1/3) - mterm^(1/3) and V a bump on
    [1, 2]. Stationary point u0 = (A h q / D)^(3/4) when D > 0, where
    f(u0) = 4 (A h)^(1/4) D^(3/4) / q^(3/4) and f''(u0) = (4/3)(D/q) u0^(-5/3).
    When N is None the dyadic block is centred on u0 (N = u0/1.5).
    """
    A = (T + r * xi) / TWO_PI
    D = np.cbrt(nterm) - np.cbrt(mterm)
    if D <= 0:
        raise NoStationaryPoint("nterm^(1/3) <= mterm^(1/3): the phase is monotone")
    u0 = (A * h * q / D) ** 0.75
    f0 = 4 * (A * h) ** 0.25 * D**0.75 / q**0.75
    f20 = (4.0 / 3.0) * (D / q) * u0 ** (-5 / 3)
    if N is None:
        N = u0 / 1.5
    V = Bump(N, 2 * N, beta, gamma)

    def f(u):
        return A * h / u + 3 * D * np.cbrt(u) / q

    def df(u):
        return -A * h / u**2 + D * np.cbrt(u) ** -2 / q

    def d2f(u):
        return 2 * A * h / u**3 - (2.0 / 3.0) * D * np.cbrt(u) ** -5 / q

    def g(u):
        return V(u) * np.cbrt(u) ** -1

    desc = PhaseDescriptor(f, g, (N, 2 * N), df, d2f, theta_f=f20 * N * N, omega_f=N,
                           theta_g=N ** (-1 / 3), omega_g=V.scale)
    return FamilyData(desc, float(u0), float(f0), float(f20), in_window=bool(N < u0 < 2 * N),
                      window={"N": N, "D": float(D), "A": A})


def poisson_h_center(T: float, r: float, xi: float, q: float, h: float, nterm: float,
                     mterm: float, y0: float = 1.5) -> float:
    """The H for which the h-integral has its stationary point at y0."""
    A1 = T + r * xi
    D = np.cbrt(nterm) - np.cbrt(mterm)
    # y0 = (P q/(4 H h))^(4/3), P = 4 (H A1)^(1/4) D^(3/4) / ((2 pi)^(1/4) q^(3/4))
    k = A1**0.25 * D**0.75 * q**0.25 / (TWO_PI**0.25 * h)
    return float((k / y0**0.75) ** (4 / 3))


def phase_poisson_h(T: float, r: float, xi: float, q: float, H: float, h: float,
                    nterm: float, mterm: float, beta: float = 1.0, gamma: float = 0.0) -> FamilyData:
    """h-integral after Poisson summation, on y in [1, 2]:

        int V(y) e(P y^(1/4) - H h y / q) dy,
        P = 4 (H (T + r xi))^(1/4) D^(3/4) / ((2 pi)^(1/4) q^(3/4)),

    with D = nterm^(1/3) - mterm^(1/3). Stationary point y0 = (P q/(4 H h))^(4/3)
    with f(y0) = 3 (T + r xi)^(1/3) D / ((2 pi)^(1/3) q^(2/3) h^(1/3)) and
    f''(y0) = -(3/16) P y0^(-7/4). The window is y0 in [1, 2].
    """
    A1 = T + r * xi
    D = float(np.cbrt(nterm) - np.cbrt(mterm))
    if D < 0:
        raise ValueError("nterm must not be below mterm")
    P = 4 * (H * A1) ** 0.25 * D**0.75 / (TWO_PI**0.25 * q**0.75)
    lin = H * h / q
    V = Bump(1.0, 2.0, beta, gamma)

    def f(y):
        return P * np.sqrt(np.sqrt(y)) - lin * y

    def df(y):
        return 0.25 * P * y ** -0.75 - lin

    def d2f(y):
        return -(3.0 / 16.0) * P * y ** -1.75

    if P > 0 and lin > 0:
        y0 = (P / (4 * lin)) ** (4 / 3)
        f0 = 3 * A1 ** (1 / 3) * D / (TWO_PI ** (1 / 3) * q ** (2 / 3) * h ** (1 / 3))
        f20 = -(3.0 / 16.0) * P * y0 ** -1.75
    else:
        y0 = f0 = f20 = None
    in_window = y0 is not None and 1.0 < y0 < 2.0
    theta = abs(f20) if in_window else max(P, lin)
    desc = PhaseDescriptor(f, V, (1.0, 2.0), df, d2f, theta_f=theta, omega_f=1.0,
                           theta_g=1.0, omega_g=V.scale)
    h_hi = P * q / (4 * H) if P > 0 else 0.0  # y0 = 1
    window = {"P": P, "h_range": (h_hi * 2 ** -0.75, h_hi), "trivial_bound": _amplitude_mass(V, 1.0, 2.0)}
    return FamilyData(desc, None if y0 is None else float(y0), f0, f20, in_window, window)


def phase_J(T: float, r: float, xi1: float, xi2: float, q1: float, q2: float, h1: float,
            h2: float, m: float, m1: float, Q: float, beta: float = 1.0, gamma: float = 0.0) -> FamilyData:
    """y-integral left by Poisson in m2, on y in [1, 2]:

        int V(y) e(B y^(1/3) - C y) dy,
        B = 3 T (E2 - E1) / (m1^(2/3) Q),  E_i = (T + r xi_i)^(1/3) / ((2 pi)^(1/3) q_i^(2/3) h_i^(1/3)),
        C = m T^3 / (Q^3 m1^2 q1 q2).

    Stationary point y0 = (B/(3C))^(3/2) when B > 0, with
    f(y0) = 2 sqrt(q1 q2/m) (E2 - E1)^(3/2) and f''(y0) = -(2/3) C / y0.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    E1 = (T + r * xi1) ** (1 / 3) / (TWO_PI ** (1 / 3) * q1 ** (2 / 3) * h1 ** (1 / 3))
    E2 = (T + r * xi2) ** (1 / 3) / (TWO_PI ** (1 / 3) * q2 ** (2 / 3) * h2 ** (1 / 3))
    B = 3 * T * (E2 - E1) / (m1 ** (2 / 3) * Q)
    C = m * T**3 / (Q**3 * m1**2 * q1 * q2)
    V = Bump(1.0, 2.0, beta, gamma)

    def f(y):
        return B * np.cbrt(y) - C * y

    def df(y):
        return (B / 3) * np.cbrt(y) ** -2 - C

    def d2f(y):
        return -(2.0 / 9.0) * B * np.cbrt(y) ** -5

    if B <= 0:
        raise NoStationaryPoint("E2 <= E1: the phase is monotone")
    y0 = (B / (3 * C)) ** 1.5
    f0 = 2 * math.sqrt(q1 * q2 / m) * (E2 - E1) ** 1.5
    f20 = -(2.0 / 3.0) * C / y0
    in_window = 1.0 < y0 < 2.0
    desc = PhaseDescriptor(f, V, (1.0, 2.0), df, d2f, theta_f=abs(f20) if in_window else max(B, C),
                           omega_f=1.0, theta_g=1.0, omega_g=V.scale)
    m_hi = m * y0 ** (2 / 3)  # y0 scales as m^(-3/2); y0 = 1 at m = m_hi
    window = {"B": B, "C": C, "m_range": (m_hi * 2 ** (-2 / 3), m_hi),
              "trivial_bound": _amplitude_mass(V, 1.0, 2.0)}
    return FamilyData(desc, float(y0), float(f0), float(f20), in_window, window)


@dataclass(frozen=True)
class IPhaseData:
    f: Callable          # f(xi1, y)
    u: Callable          # amplitude on the box
    box: tuple[tuple[float, float], tuple[float, float]]
    xi0: float | None
    y0: float | None
    f0: float | None
    hessian: np.ndarray | None
    det: float | None
    q1: float
    in_window: bool
    window: dict = field(default_factory=dict)


def phase_I_2d(T: float, r: float, xi2: float, xi2p: float, q2: float, q2p: float,
               h1: float, h2: float, h2p: float, m: float, m1: float, Q: float,
               u1_tilde: float, X: float, q1_scale: float | None = None,
               beta: float = 1.0, gamma: float = 0.0) -> IPhaseData:
    """Two-variable phase left after Poisson in q1, on xi1 in [X, 2X], y in [1, 2]:

        f(xi1, y) = 2 sqrt(Q y / m) L_{3/2} - F y,
        L_k = sqrt(q2 m1) (Xi2 - Xi1)^k - sqrt(q2' m1) (Xi2' - Xi1)^k,
        Xi1 = (T + r xi1)^(1/3) / (2 pi (Q y)^2 h1)^(1/3),
        Xi2 = (T + r xi2)^(1/3) / (2 pi q2^2 m1^2 h2)^(1/3) (and Xi2' likewise),
        F = q1 Q / (m h1 h2 h2'),  q1 = u1_tilde / q1_scale.

    ``q1_scale`` stands for m1 vt1^2 vt2 vt2' d and defaults to m1. The
    stationary point has Xi1 = (q2 Xi2 - q2' Xi2')/(q2 - q2') and
    sqrt(y0) = sqrt(Q/m) L_{3/2} / F, giving
    f = h1 h2 h2' q2 q2' m1 (Xi2' - Xi2)^3 / (q1 (q2 - q2')) and
    det H = -(Q/(12 m y0)) r^2 Xi1^2 L_{3/2} L_{-1/2} / (T + r xi0)^2.
    """
    if q2 == q2p:
        raise DegenerateConfiguration("q2 = q2' makes the stationary equations singular")
    if r == 0:
        raise DegenerateConfiguration("r = 0 makes the phase independent of xi1")
    if q1_scale is None:
        q1_scale = m1
    q1 = u1_tilde / q1_scale
    c1 = (TWO_PI * Q * Q * h1) ** (1 / 3)
    Xi2 = (T + r * xi2) ** (1 / 3) / (TWO_PI * q2 * q2 * m1 * m1 * h2) ** (1 / 3)
    Xi2p = (T + r * xi2p) ** (1 / 3) / (TWO_PI * q2p * q2p * m1 * m1 * h2p) ** (1 / 3)
    F = q1 * Q / (m * h1 * h2 * h2p)
    a2, a2p = math.sqrt(q2 * m1), math.sqrt(q2p * m1)

    def Xi1(xi1, y):
        return np.cbrt(T + r * xi1) / (c1 * np.cbrt(y) ** 2)

    def f(xi1, y):
        x1 = Xi1(xi1, y)
        M = Xi2 - x1
        Mp = Xi2p - x1
        L32 = a2 * np.sign(M) * np.abs(M) ** 1.5 - a2p * np.sign(Mp) * np.abs(Mp) ** 1.5
        return 2 * np.sqrt(Q * y / m) * L32 - F * y

    U = Bump(X, 2 * X, beta, gamma)
    W = Bump(1.0, 2.0, beta, gamma)

    def u(xi1, y):
        return U(xi1) * W(y)

    box = ((float(X), float(2 * X)), (1.0, 2.0))
    window: dict = {"q1": q1, "F": F}
    s = (Xi2p - Xi2) / (q2 - q2p)
    x1s = (q2 * Xi2 - q2p * Xi2p) / (q2 - q2p)
    xi0 = y0 = det = H = None
    # closed-form stationary value; it is attained only when the point below exists
    f0 = h1 * h2 * h2p * q2 * q2p * m1 * (Xi2p - Xi2) ** 3 / (q1 * (q2 - q2p))
    if s > 0 and x1s > 0 and q2p > q2:
        L32 = math.sqrt(m1 * q2 * q2p) * (q2p - q2) * s**1.5
        y0 = (math.sqrt(Q / m) * L32 / F) ** 2
        A0 = x1s**3 * c1**3 * y0**2
        xi0 = (A0 - T) / r
        M, Mp = q2p * s, q2 * s
        Lm12 = a2 / math.sqrt(M) - a2p / math.sqrt(Mp)
        root = math.sqrt(Q / (m * y0))
        fxx = math.sqrt(Q * y0 / m) * r * r * x1s**2 * Lm12 / (6 * A0 * A0)
        fxy = -root * r * x1s**2 * Lm12 / (3 * A0)
        fyy = -root / y0 * (L32 / 2 - 2 * Lm12 * x1s**2 / 3)
        H = np.array([[fxx, fxy], [fxy, fyy]])
        det = -(Q / (12 * m * y0)) * r * r * x1s**2 * L32 * Lm12 / A0**2
        window["q1_edge"] = q1 * math.sqrt(y0)  # y0 = 1 here; y0 scales as q1^-2
    in_window = xi0 is not None and box[0][0] < xi0 < box[0][1] and 1.0 < y0 < 2.0
    return IPhaseData(f, u, box, xi0, y0, f0, H, det, q1, in_window, window)


# ------------------------------------------------------------- cubic phase

@dataclass(frozen=True)
class CubicRootPhase:
    """f(xi) = a - b xi^(1/3) + c xi^(2/3) - d xi with real cube roots."""

    a: float
    b: float
    c: float
    d: float
    domain: tuple[float, float]

    def __post_init__(self):
        lo, hi = self.domain
        if not lo < hi or lo <= 0 <= hi:
            raise ValueError("domain must be an interval not containing 0")

    @property
    def discriminant(self) -> float:
        return self.c * self.c - 3 * self.b * self.d

    def f(self, x):
        t = np.cbrt(np.asarray(x, dtype=float))
        return self.a - self.b * t + self.c * t * t - self.d * t**3

    def fprime(self, x):
        t = 1 / np.cbrt(np.asarray(x, dtype=float))
        return -self.b * t * t / 3 + 2 * self.c * t / 3 - self.d

    def fsecond(self, x):
        t = 1 / np.cbrt(np.asarray(x, dtype=float))
        return 2 * t**4 * (self.b * t - self.c) / 9


@dataclass(frozen=True)
class CubicAnalysis:
    stationary_points: tuple[float, ...]
    f2: tuple[float, ...]
    branch: tuple[int, ...]       # sign in xi^(-1/3) = (c +- sqrt(c^2 - 3bd))/b
    degenerate: bool
    min_abs_fprime: float
    argmin: float


def cubic_phase_analysis(p: CubicRootPhase) -> CubicAnalysis:
    """Stationary points via xi^(-1/3) = (c +- sqrt(c^2 - 3bd))/b.

    f''(xi0) = +-(2/9) xi0^(-4/3) sqrt(c^2 - 3bd). The minimum of |f'| is 0 at
    an interior stationary point, else |c^2 - 3bd|/(3|b|) at xi^(-1/3) = c/b
    when that point is interior, else the smaller endpoint value.
    """
    if p.b == 0:
        raise ZeroLeadingCoefficient("b = 0: f' is not quadratic in xi^(-1/3)")
    lo, hi = p.domain
    disc = p.discriminant
    pts, f2s, branches = [], [], []
    degenerate = False
    if disc >= 0:
        sq = math.sqrt(disc)
        for sgn in ((1,) if disc == 0 else (1, -1)):
            t = (p.c + sgn * sq) / p.b
            if t == 0:
                continue
            xi = 1 / t**3
            if lo < xi < hi:
                pts.append(xi)
                f2s.append(sgn * 2 * t**4 * sq / 9)
                branches.append(sgn)
                degenerate |= disc == 0
    order = np.argsort(pts)
    pts = tuple(float(pts[i]) for i in order)
    f2s = tuple(float(f2s[i]) for i in order)
    branches = tuple(int(branches[i]) for i in order)
    if pts:
        return CubicAnalysis(pts, f2s, branches, degenerate, 0.0, pts[0])
    cands = [(abs(float(p.fprime(lo))), lo), (abs(float(p.fprime(hi))), hi)]
    if p.c != 0:
        xs = (p.b / p.c) ** 3
        if lo < xs < hi:
            cands.append((abs(disc) / (3 * abs(p.b)), xs))
    val, arg = min(cands)
    return CubicAnalysis((), (), (), degenerate, float(val), float(arg))
