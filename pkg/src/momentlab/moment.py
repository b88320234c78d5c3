"""Second moment of L(F, 1/2 + it) and the reduction steps that precede the
delta method: window splitting, the shifted-sum form, large-sieve duality,
the diagonal part of Delta, and exponent fits of moment curves.

Smooth weights all come from one family (``smooth_step`` and
``oscillatory.Bump``); see ``WEIGHTS`` for the concrete choices.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats
from scipy.special import bernoulli

from .errors import ConvergenceFailure, InsufficientData
from .expsums import diag_char_sum
from .gl3 import TAU3, GL3Form, l_value_afe
from .oscillatory import Bump, PhaseDescriptor, _adaptive, quad_oscillatory_1d

__all__ = [
    "EPSILON", "MomentRunConfig", "MomentPoint", "MomentCurve", "params_for", "second_moment",
    "moment_curve", "critical_values", "window_weight", "split_average_check", "SplitReport",
    "shifted_sum_form", "ShiftedSumReport", "large_sieve_duality_check", "DiagPoint",
    "delta_diagonal_report", "DiagonalReport", "exponent_fit", "ExponentFit", "WEIGHTS",
]

EPSILON = 0.1
X_EXPONENT = 23 / 44
EVAL_BUDGET = 2_000_000

WEIGHTS = {
    "V": "smooth_step plateau: 1 on [0, 1], support [-1/2, 3/2]",
    "V1": "Bump(1, 2, beta=1)",
    "V2": "Bump(1, 2, beta=1)",
    "W": "smooth_step plateau: 1 on [-1/2, 1/2], support [-1, 1]",
}


# ------------------------------------------------------------- parameters

@dataclass(frozen=True)
class MomentRunConfig:
    T: float
    X: float
    Q: float
    H: float
    N: float
    epsilon: float = EPSILON
    resolution: float = 1.0  # panels per oscillation scale 2 pi / log N
    rel_tol: float = 1e-4


def params_for(T: float, epsilon: float = EPSILON, **kw) -> MomentRunConfig:
    """X = T^{23/44}, Q = sqrt(X) T^{1/4}, N = T^{3/2}, H = N T^eps / X."""
    if T < 100:
        raise ValueError("T must be at least 100")
    X = T**X_EXPONENT
    N = T**1.5
    cfg = MomentRunConfig(T, X, math.sqrt(X) * T**0.25, N * T**epsilon / X, N, epsilon, **kw)
    # X / T^{1/2} = T^{1/44}: the Taylor step needs X >> T^{1/2}
    assert cfg.X > math.sqrt(T)
    return cfg


def _config(T: float, cfg: MomentRunConfig | None) -> MomentRunConfig:
    if cfg is not None:
        return cfg
    X = T**X_EXPONENT
    N = T**1.5
    return MomentRunConfig(T, X, math.sqrt(X) * T**0.25, N * T**EPSILON / X, N)


# ------------------------------------------------------- critical values

_B2K = bernoulli(40)[2::2]  # B_2, B_4, ..., B_40


def _zeta_critical(t: np.ndarray) -> np.ndarray:
    """zeta(1/2 + it) by Euler-Maclaurin summation, vectorized over t."""
    t = np.asarray(t, dtype=np.float64)
    flat = t.ravel()
    out = np.empty(flat.shape, dtype=np.complex128)
    for i in range(0, flat.size, 512):
        tb = flat[i:i + 512]
        s = 0.5 + 1j * tb
        N = int(np.max(np.abs(tb))) // 2 + 20
        n = np.arange(1, N, dtype=np.float64)
        head = np.exp(-np.outer(s, np.log(n))).sum(axis=1)
        tail = N ** (1 - s) / (s - 1) + 0.5 * N ** (-s)
        rising = s.copy()
        fact = 2.0
        for k, b in enumerate(_B2K, start=1):
            tail = tail + b / fact * rising * N ** (-s - 2 * k + 1)
            rising = rising * (s + 2 * k - 1) * (s + 2 * k)
            fact *= (2 * k + 1) * (2 * k + 2)
        out[i:i + 512] = head + tail
    return out.reshape(t.shape)


def critical_values(t, form: GL3Form) -> np.ndarray:
    """L(F, 1/2 + it) at an array of heights.

    The tau_3 model has L = zeta^3, evaluated by vectorized Euler-Maclaurin;
    other forms go through the approximate functional equation.
    """
    t = np.asarray(t, dtype=np.float64)
    if form.provider == TAU3:
        return _zeta_critical(t) ** 3
    return np.vectorize(lambda x: l_value_afe(float(x), form).value, otypes=[complex])(t)


# ---------------------------------------------------------- second moment

@dataclass(frozen=True)
class MomentPoint:
    T: float
    value: float
    err: float
    end: float
    n_evals: int = 0

    def __post_init__(self):
        if self.value < 0 or not math.isfinite(self.err):
            raise ValueError("moment values are nonnegative with a finite error")


@dataclass(frozen=True)
class MomentCurve:
    points: tuple[MomentPoint, ...]

    @property
    def T(self) -> np.ndarray:
        return np.array([p.T for p in self.points])

    @property
    def M(self) -> np.ndarray:
        return np.array([p.value for p in self.points])


def _integrate(func, a: float, b: float, n0: int, rel_tol: float) -> tuple[float, float, int]:
    """Gauss-Kronrod on n0 equal panels, refined until the error is below
    rel_tol of the value."""
    value, err, n = _adaptive(func, a, b, math.inf, EVAL_BUDGET, n0=n0)
    if err > rel_tol * abs(value):
        value, err, m = _adaptive(func, a, b, rel_tol * abs(value), EVAL_BUDGET, n0=n0)
        n += m
    return value.real, err, n


def second_moment(T: float, form: GL3Form, cfg: MomentRunConfig | None = None, *,
                  end: float | None = None) -> MomentPoint:
    """int_T^end |L(F, 1/2 + it)|^2 dt, end = 2T by default.

    Initial panels are no wider than 2 pi / (resolution log N), the
    oscillation scale of the length-N Dirichlet polynomial.
    """
    cfg = _config(T, cfg)
    end = 2 * T if end is None else float(end)
    if end < T:
        raise ValueError("end must not precede T")
    if end == T:
        return MomentPoint(T, 0.0, 0.0, end)
    spacing = 2 * math.pi / (cfg.resolution * math.log(cfg.N))
    n0 = int(math.ceil((end - T) / spacing))

    def integrand(t):
        return np.abs(critical_values(t, form)) ** 2

    value, err, n = _integrate(integrand, T, end, n0, cfg.rel_tol)
    return MomentPoint(T, value, err, end, n)


def moment_curve(Ts: Sequence[float], form: GL3Form, resolution: float = 1.0) -> MomentCurve:
    pts = []
    for T in sorted(Ts):
        c = _config(T, None)
        pts.append(second_moment(T, form, MomentRunConfig(c.T, c.X, c.Q, c.H, c.N,
                                                          resolution=resolution)))
    return MomentCurve(tuple(pts))


@dataclass(frozen=True)
class ExponentFit:
    slope: float
    stderr: float
    intercept: float


def exponent_fit(curve: MomentCurve) -> ExponentFit:
    """Least-squares slope of log M against log T."""
    T, M = curve.T, curve.M
    if T.size < 4 or T.max() < 10 * T.min():
        raise InsufficientData("need at least 4 samples spanning a decade")
    if np.any(M <= 0):
        raise InsufficientData("moment values must be positive for a log fit")
    res = stats.linregress(np.log(T), np.log(M))
    return ExponentFit(float(res.slope), float(res.stderr), float(res.intercept))


# --------------------------------------------------------------- splitting

def smooth_step(x):
    """C-infinity step: 0 for x <= 0, 1 for x >= 1."""
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(x > 0, np.exp(-1 / np.where(x > 0, x, 1)), 0.0)
        b = np.where(x < 1, np.exp(-1 / np.where(x < 1, 1 - x, 1)), 0.0)
    return a / (a + b)


def window_weight(x):
    """V: 1 on [0, 1], supported on [-1/2, 3/2]."""
    x = np.asarray(x, dtype=np.float64)
    return smooth_step(2 * (x + 0.5)) * smooth_step(2 * (1.5 - x))


def _h_weight(x):
    """W: even, 1 on [-1/2, 1/2], supported on [-1, 1]."""
    x = np.abs(np.asarray(x, dtype=np.float64))
    return smooth_step(2 * (1 - x))


V_MASS = 1.5  # int V: each edge adds 1/4 since the step is antisymmetric about 1/2


@dataclass(frozen=True)
class SplitReport:
    T: float
    X: float
    xi: float
    lhs: float
    rhs: float
    ratio: float
    r_range: tuple[int, int]
    covered: bool


def split_average_check(T: float, X: float, form: GL3Form, xi: float | None = None,
                        rel_tol: float = 1e-6) -> SplitReport:
    """int_{2T}^{3T} |L|^2 against sum_{T/2X <= r <= 2T/X} int |L|^2 V((t - T - r xi)/xi)."""
    xi = X if xi is None else float(xi)
    r_lo, r_hi = math.ceil(T / (2 * X)), math.floor(2 * T / X)
    if r_lo > r_hi:
        raise ValueError("no admissible r: X is too large for this T")
    rs = np.arange(r_lo, r_hi + 1)
    # plateaus [T + r xi, T + (r+1) xi] must cover [2T, 3T]
    covered = bool(T + r_lo * xi <= 2 * T and T + (r_hi + 1) * xi >= 3 * T)
    spacing = 2 * math.pi / math.log(T**1.5)

    def f(t):
        return np.abs(critical_values(t, form)) ** 2

    lhs, _, _ = _integrate(f, 2 * T, 3 * T, int(math.ceil(T / spacing)), rel_tol)

    def windowed(t):
        w = sum(window_weight((t - T - r * xi) / xi) for r in rs)
        return f(t) * w

    a, b = T + (r_lo - 0.5) * xi, T + (r_hi + 1.5) * xi
    rhs, _, _ = _integrate(windowed, a, b, int(math.ceil((b - a) / spacing)), rel_tol)
    return SplitReport(T, X, xi, lhs, rhs, rhs / lhs, (int(r_lo), int(r_hi)), covered)


# ------------------------------------------------------- shifted-sum form

@dataclass(frozen=True)
class ShiftedSumReport:
    frak: complex  # shifted-sum form, xi kept inside the integral
    direct: float  # double integral of |D(t)|^2 V((t - T - r xi)/xi) V2(xi/X)
    opened: complex  # same double integral with the square opened exactly
    ratio: float
    taylor_max: float
    taylor_bound: float
    h_bins: dict = field(default_factory=dict)
    H: float = 0.0
    N: float = 0.0


def _dirichlet_poly(t: np.ndarray, a: np.ndarray, n: np.ndarray) -> np.ndarray:
    logn = np.log(n)
    out = np.empty(t.shape, dtype=np.complex128)
    for i in range(0, t.size, 256):
        out[i:i + 256] = np.exp(-1j * np.outer(t[i:i + 256], logn)) @ a
    return out


def _gl(a: float, b: float, n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * (b - a) * w


def _window_transform(omega_max: float):
    """Spline for Vhat(w) = int V(u) e^{iwu} du on [-omega_max, omega_max]."""
    from scipy.interpolate import CubicSpline
    us, wu = _gl(-0.5, 1.5, 400)
    wu = wu * window_weight(us)
    w = np.linspace(-omega_max, omega_max, int(omega_max * 50) + 2)
    vals = np.exp(1j * np.outer(w, us)) @ wu
    return CubicSpline(w, vals)


def shifted_sum_form(r: float, T: float, X: float, form: GL3Form,
                     cfg: MomentRunConfig | None = None, xi_nodes: int | None = None) -> ShiftedSumReport:
    """The shifted convolution sum against the windowed double integral.

    direct:  int int |sum_n A(1,n) n^{-it} V1(n/N)|^2 V((t - T - r xi)/xi) V2(xi/X) dt dxi
    opened:  the same with the square opened: sum over n, h of
             A(1,n) conj A(1,n+h) V1 V1 (1+h/n)^{i(T + r xi)} xi int (1+h/n)^{iu xi} V(u) du
    frak:    int xi sum_{h, n} A(1,n) conj A(1,n+h) e((T + r xi) h / (2 pi n))
             W(h/H) V1(n/N) V1((n+h)/N) (int V) V2(xi/X) dxi
    h_bins maps k to the |opened| contribution of 2^k H < |h| <= 2^{k+1} H.
    The xi rule resolves the phase r xi log(1 + h/n), which spans up to
    (|r| + 2) X log 2 radians over xi in [X, 2X].
    """
    cfg = _config(T, cfg)
    N, H = cfg.N, cfg.H
    if xi_nodes is None:
        xi_nodes = max(48, int(math.ceil(0.5 * (abs(r) + 2) * X * math.log(2))) + 16)
    V1 = Bump(1.0, 2.0)
    n = np.arange(int(math.floor(N)) + 1, int(math.ceil(2 * N)))
    a = form.table.first_row(int(n[-1]) + int(4 * H) + 1)
    An = a[n - 1] * V1(n / N)
    xis, wxi = _gl(X, 2 * X, xi_nodes)
    wxi = wxi * Bump(1.0, 2.0)(xis / X)

    # direct double quadrature: t-nodes at 12 per unit of the fastest oscillation
    direct = 0.0
    per = max(8, int(math.ceil(12 * math.log(2 * N) / (2 * math.pi))))
    for xi, w in zip(xis, wxi):
        lo, hi = T + (r - 0.5) * xi, T + (r + 1.5) * xi
        k = int(math.ceil(hi - lo))
        edges = np.linspace(lo, hi, k + 1)
        ts = []
        ws = []
        for e0, e1 in zip(edges[:-1], edges[1:]):
            x, wx = _gl(e0, e1, per)
            ts.append(x)
            ws.append(wx)
        ts = np.concatenate(ts)
        ws = np.concatenate(ws) * window_weight((ts - T - r * xi) / xi)
        direct += w * float(np.sum(ws * np.abs(_dirichlet_poly(ts, An, n)) ** 2))

    # opened square and the shifted-sum form share the (n, h) grid
    hmax = int(math.ceil(N))  # n and n + h both lie in (N, 2N)
    vhat = _window_transform(2 * X * math.log1p(hmax / N) + 1)
    opened = 0j
    frak = 0j
    bins: dict[int, complex] = {}
    nf = n.astype(np.float64)
    for h in range(-hmax, hmax + 1):
        m = n + h
        ok = (m >= 1) & (m < 2 * N)
        if not np.any(ok):
            continue
        nn, mm = nf[ok], m[ok].astype(np.float64)
        coef = An[ok] * np.conj(a[m[ok] - 1]) * V1(mm / N)
        if not np.any(coef):
            continue
        L = np.log1p(h / nn)
        # opened: sum_n coef * int xi e^{i(T + r xi) L} Vhat(xi L) V2 dxi
        inner = vhat(np.outer(xis, L))
        val = np.sum(wxi[:, None] * xis[:, None] * np.exp(1j * np.outer(T + r * xis, L)) * inner, axis=0)
        c_open = complex(np.sum(coef * val))
        opened += c_open
        if abs(h) > H:
            k = int(math.floor(math.log2(abs(h) / H)))
            bins[k] = bins.get(k, 0j) + c_open
        wh = float(_h_weight(h / H))
        if wh:
            ph = np.exp(1j * np.outer(T + r * xis, h / nn))
            frak += wh * V_MASS * complex(np.sum(coef * ((wxi * xis) @ ph)))
    hs = np.linspace(-H, H, 201)
    ns = np.linspace(N, 2 * N, 201)
    hh, nn_ = np.meshgrid(hs, ns)
    taylor = np.abs(T * np.log1p(hh / nn_) - T * hh / nn_)
    return ShiftedSumReport(frak, direct, opened, abs(frak) / direct, float(taylor.max()),
                            T * H * H / (N * N), {k: abs(v) for k, v in sorted(bins.items())}, H, N)


# ------------------------------------------------------ large-sieve duality

def _top_eigenvalue(A: np.ndarray, tol: float, max_iter: int) -> float:
    """Largest eigenvalue of a Hermitian positive semidefinite matrix."""
    v = np.ones(A.shape[0], dtype=np.complex128)
    v += 0.01 * np.arange(A.shape[0])  # break symmetry deterministically
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = A @ v
        new = float(np.real(np.vdot(v, w)))
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0
        v = w / nw
        if abs(new - lam) <= tol * abs(new):
            return float(np.real(np.vdot(v, A @ v)))
        lam = new
    raise ConvergenceFailure(f"power iteration did not converge in {max_iter} steps")


def large_sieve_duality_check(phi, tol: float = 1e-14,
                              max_iter: int = 200_000) -> tuple[float, float]:
    """sup over unit alpha of sum_n |sum_m alpha_m phi(m,n)|^2, and the same
    with the roles of m and n exchanged.

    Both are the largest eigenvalue of phi* phi (resp. phi phi*), computed by
    power iteration.
    """
    phi = np.asarray(phi, dtype=np.complex128)
    if phi.ndim != 2 or phi.size == 0:
        raise ValueError("phi must be a non-empty matrix")
    forward = _top_eigenvalue(phi.conj() @ phi.T, tol, max_iter)
    dual = _top_eigenvalue(phi.T @ phi.conj(), tol, max_iter)
    return forward, dual


# ----------------------------------------------------------- diagonal Delta

@dataclass(frozen=True)
class DiagPoint:
    q: int
    h1: int
    h2: int
    xi1: float
    xi2: float
    m1: int = 1


@dataclass(frozen=True)
class DiagonalReport:
    value: complex
    scale: float
    ratio: float
    terms: tuple = ()


def _diag_J(T: float, r: float, Q: float, p: DiagPoint, tol: float = 1e-10) -> complex:
    """int_1^2 e(c2 y^{1/3} - c1 y^{1/3}) V1(y) dy, the m = 0 integral."""
    def coef(xi, h):
        return 3 * (T + r * xi) ** (1 / 3) * T / ((2 * math.pi) ** (1 / 3) * p.m1 ** (2 / 3)
                                                 * p.q ** (2 / 3) * h ** (1 / 3) * Q)

    c = coef(p.xi2, p.h2) - coef(p.xi1, p.h1)
    g = Bump(1.0, 2.0)
    desc = PhaseDescriptor(lambda y: c * np.cbrt(y), g, (1.0, 2.0),
                           lambda y: c / 3 * np.cbrt(y) ** -2, lambda y: -2 * c / 9 * np.cbrt(y) ** -5,
                           theta_f=abs(c) + 1)
    return quad_oscillatory_1d(desc, tol).value


def delta_diagonal_report(T: float, X: float, grid: Sequence[DiagPoint],
                          r: float | None = None) -> DiagonalReport:
    """m = 0 part of Delta over a grid with unit coefficients:

    sum (T/Q)^3 / q^2 * C(q; h1, h2) * J, C the character sum
    sum_beta S(h1bar, beta; q) S(h2bar, beta; q) = q^2 c_q(h1bar - h2bar),
    reported against (T/Q)^3 Q X^2 / T.
    """
    Q = math.sqrt(X) * T**0.25
    r = T / X if r is None else r
    scale = (T / Q) ** 3 * Q * X * X / T
    terms = []
    total = 0j
    for p in grid:
        C = diag_char_sum(p.q, p.q, p.h1, p.h2).value
        J = _diag_J(T, r, Q, p)
        val = (T / Q) ** 3 / p.q**2 * C * J
        total += val
        terms.append((p, C, J, val))
    return DiagonalReport(total, scale, abs(total) / scale, tuple(terms))
