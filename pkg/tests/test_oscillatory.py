import math
import warnings

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, optimize

import phase_draws as pd
from momentlab.errors import (
    BudgetExceeded,
    ConditionViolation,
    DegenerateConfiguration,
    DegenerateHessian,
    MultipleStationaryPoints,
    NoStationaryPoint,
    StationaryPointPresent,
    ZeroLeadingCoefficient,
)
from momentlab.oscillatory import (
    DECAY_WINDOW,
    Bump,
    CubicRootPhase,
    OscillatoryResult,
    PhaseDescriptor,
    bky_main_term,
    cubic_phase_analysis,
    find_stationary_point,
    first_derivative_bound,
    hormander_2d_main_term,
    phase_I_2d,
    phase_J,
    phase_poisson_h,
    phase_voronoi_m,
    phase_voronoi_n,
    poisson_h_center,
    quad_oscillatory_1d,
    quad_oscillatory_2d,
)

warnings.simplefilter("ignore", ConditionViolation)


def one(x):
    return np.ones_like(np.asarray(x, dtype=float))


def scipy_oscillatory(f, g, a, b):
    """Independent oracle: QUADPACK on real and imaginary parts."""
    kw = dict(limit=2000, epsabs=1e-13, epsrel=1e-12)
    re = integrate.quad(lambda x: float(g(x)) * math.cos(2 * math.pi * float(f(x))), a, b, **kw)[0]
    im = integrate.quad(lambda x: float(g(x)) * math.sin(2 * math.pi * float(f(x))), a, b, **kw)[0]
    return complex(re, im)


# ------------------------------------------------------------ quadrature

@pytest.mark.parametrize("k", [0, 1, 5, 13, 22])
def test_kronrod_polynomial_exactness(k):
    p = PhaseDescriptor(lambda x: 0 * x, lambda x: x**k, (0.0, 1.0))
    assert abs(quad_oscillatory_1d(p).value - 1 / (k + 1)) < 1e-14


def test_nonoscillatory_bump_is_real():
    g = Bump(-1.0, 1.0)
    res = quad_oscillatory_1d(PhaseDescriptor(lambda x: 0 * x, g, (-1.0, 1.0)))
    want = integrate.quad(lambda x: float(g(x)), -1, 1, epsabs=1e-14)[0]
    assert res.value.imag == 0 and abs(res.value.real - want) < 1e-12
    assert res.method == "quadrature" and res.err < 1e-10


def test_integer_frequency_vanishes():
    res = quad_oscillatory_1d(PhaseDescriptor(lambda x: 100 * x, one, (0.0, 1.0)))
    assert abs(res.value) < 1e-12


def test_fresnel_main_term():
    lam = 50
    res = quad_oscillatory_1d(PhaseDescriptor(lambda x: lam * x * x, Bump(-1.0, 1.0), (-1.0, 1.0)))
    main = np.exp(0.25j * math.pi) / math.sqrt(2 * lam)
    assert abs(res.value - main) / abs(main) < 0.05


@pytest.mark.parametrize("lam", [3.7, 40.0, 310.0])
def test_quadrature_matches_quadpack(lam):
    f = lambda x: lam * np.sin(x) + x**2  # noqa: E731
    g = Bump(0.0, 2.5)
    res = quad_oscillatory_1d(PhaseDescriptor(f, g, (0.0, 2.5)))
    assert abs(res.value - scipy_oscillatory(f, g, 0.0, 2.5)) < 1e-9


def test_budget_exceeded_carries_partial():
    p = PhaseDescriptor(lambda x: 1e5 * x * x, one, (0.0, 1.0))
    with pytest.raises(BudgetExceeded) as info:
        quad_oscillatory_1d(p, budget=5000)
    assert isinstance(info.value.partial, OscillatoryResult)
    assert info.value.partial.flags["partial"]


def test_result_invariants():
    with pytest.raises(ValueError):
        OscillatoryResult(1.0, float("nan"), "quadrature")
    with pytest.raises(ValueError):
        OscillatoryResult(1e-3, 1.0, "negligible")


def test_supplied_second_derivative_checked():
    fd = phase_voronoi_n(1e4, 1, 1e3, 3, 1, 1e3, 5e3)
    assert fd.descriptor.check_second_derivative(np.random.default_rng(0)) < 1e-5
    bad = PhaseDescriptor(lambda x: x**3, one, (1.0, 2.0), d2f=lambda x: 5 * x)
    with pytest.raises(ValueError):
        bad.check_second_derivative(np.random.default_rng(0))


# ------------------------------------------------------- stationary phase

@pytest.mark.parametrize("lam", [20.0, 80.0, 400.0])
def test_bky_quadratic(lam):
    p = PhaseDescriptor(lambda x: lam * x * x, Bump(-1.0, 1.0), (-1.0, 1.0), theta_f=2 * lam)
    ref = quad_oscillatory_1d(p).value
    main = bky_main_term(p, 1)
    assert abs(main.value - np.exp(0.25j * math.pi) / math.sqrt(2 * lam)) < 1e-12
    assert abs(main.value - ref) / abs(ref) < 1 / lam
    assert abs(bky_main_term(p, 2).value - ref) / abs(ref) < 1 / lam**2


def test_bky_negative_curvature_branch():
    lam = 60.0
    p = PhaseDescriptor(lambda x: -lam * x * x, Bump(-1.0, 1.0), (-1.0, 1.0), theta_f=2 * lam)
    ref = quad_oscillatory_1d(p).value
    assert abs(bky_main_term(p, 2).value - ref) / abs(ref) < 1e-4


def test_bky_poisson_h_example():
    T, X = 1e4, 1e2
    H = poisson_h_center(T, 1, X, 5, 1, 8e3, 0)
    p = phase_poisson_h(T, 1, X, 5, H, 1, 8e3, 0).descriptor
    ref = quad_oscillatory_1d(p).value
    assert abs(bky_main_term(p, 1).value - ref) / abs(ref) < 0.1


def test_bky_zero_amplitude():
    p = PhaseDescriptor(lambda x: 30 * x * x, lambda x: 0 * x, (-1.0, 1.0), theta_f=60)
    assert bky_main_term(p, 2).value == 0


def test_bky_errors():
    with pytest.raises(NoStationaryPoint):
        bky_main_term(PhaseDescriptor(lambda x: 5 * x, Bump(0.0, 1.0), (0.0, 1.0)))
    with pytest.raises(MultipleStationaryPoints):
        bky_main_term(PhaseDescriptor(lambda x: 20 * np.cos(6 * x), Bump(-2.0, 2.0), (-2.0, 2.0)))
    with pytest.raises(ValueError):
        bky_main_term(PhaseDescriptor(lambda x: x * x, Bump(-1.0, 1.0), (-1.0, 1.0)), n_terms=3)


def test_bky_condition_violation_flagged():
    p = PhaseDescriptor(lambda x: 0.5 * x * x, Bump(-1.0, 1.0), (-1.0, 1.0), theta_f=1.0)
    with pytest.warns(ConditionViolation):
        res = bky_main_term(p)
    assert not res.flags["conditions"]["ok"] and res.value != 0


def test_first_derivative_bound_examples():
    lin = PhaseDescriptor(lambda x: 10 * x, one, (0.0, 1.0), df=lambda x: 10 + 0 * x)
    assert abs(first_derivative_bound(lin) - 0.2) < 1e-12
    # exact linear-phase integral is 0 here; the sharp bound is 1/(pi Lambda)
    assert abs(quad_oscillatory_1d(lin).value) <= 1 / (10 * math.pi) <= 0.2
    cubic = PhaseDescriptor(lambda x: x**3 + x, one, (1.0, 2.0), df=lambda x: 3 * x * x + 1)
    bound = first_derivative_bound(cubic)
    assert abs(bound - 0.5) < 1e-9
    assert abs(quad_oscillatory_1d(cubic).value) <= bound


def test_first_derivative_bound_stationary():
    with pytest.raises(StationaryPointPresent):
        first_derivative_bound(PhaseDescriptor(lambda x: x * x, one, (-1.0, 1.0), df=lambda x: 2 * x))


@settings(max_examples=40, deadline=None)
@given(st.floats(0.5, 300), st.floats(-5, 5), st.floats(0.1, 3))
def test_first_derivative_bound_holds(lam, curv, width):
    # f' = lam + curv x is monotone and bounded away from 0 on [0, width] when lam + curv width > 0
    if lam + curv * width <= 0.1:
        return
    p = PhaseDescriptor(lambda x: lam * x + curv * x * x / 2, one, (0.0, width),
                        df=lambda x: lam + curv * x)
    assert abs(quad_oscillatory_1d(p).value) <= first_derivative_bound(p) * (1 + 1e-9)


def test_first_derivative_bound_decreasing():
    bounds = [first_derivative_bound(PhaseDescriptor(lambda x, k=k: k * x, one, (0.0, 1.0),
                                                     df=lambda x, k=k: k + 0 * x))
              for k in (1, 2, 5, 50, 500)]
    assert all(a > b for a, b in zip(bounds, bounds[1:]))


# ------------------------------------------------------------- two dims

def _bump2(x, y):
    return Bump(-1.0, 1.0)(x) * Bump(-1.0, 1.0)(y)


@pytest.mark.parametrize("sx, sy", [(1, -1), (1, 1), (-1, -1)])
def test_hormander_quadratic(sx, sy):
    lam = 15.0

    def f(x, y):
        return sx * x * x + sy * y * y

    main = hormander_2d_main_term(f, _bump2, lam, ((-1, 1), (-1, 1)))
    ref = quad_oscillatory_2d(f, _bump2, ((-1, 1), (-1, 1)), lam=lam, tol=1e-9)
    assert abs(abs(main.value) - 1 / (lam * 2)) < 1e-9
    assert abs(main.value - ref.value) / abs(ref.value) < 2.0 / lam


def test_hormander_zero_amplitude():
    res = hormander_2d_main_term(lambda x, y: x * x - y * y, lambda x, y: 0 * x, 10.0, ((-1, 1), (-1, 1)))
    assert res.value == 0


def test_hormander_errors():
    with pytest.raises(NoStationaryPoint):
        hormander_2d_main_term(lambda x, y: x + 2 * y, _bump2, 10.0, ((-1, 1), (-1, 1)))
    with pytest.raises(DegenerateHessian):
        hormander_2d_main_term(lambda x, y: (x - 0.1) ** 2 + (y - 0.2) ** 4, _bump2, 10.0,
                               ((-1, 1), (-1, 1)),
                               grad=lambda p: np.array([2 * (p[0] - 0.1), 4 * (p[1] - 0.2) ** 3]),
                               hess=lambda p: np.diag([2.0, 12 * (p[1] - 0.2) ** 2]))


# --------------------------------------------------------------- families

def test_voronoi_m_small_m_nonoscillatory():
    fd = phase_voronoi_m(1e4, 1, 100, 50, 1e-12, 1e6, 0, 100)
    res = quad_oscillatory_1d(fd.descriptor)
    assert abs(abs(res.value) - fd.window["trivial_bound"]) < 1e-6 * fd.window["trivial_bound"]
    assert fd.in_window


@pytest.mark.parametrize("q", [50, 100, 150])
def test_voronoi_m_far_above_truncation(q):
    T, Q, N = 1e4, 100.0, 1e6
    m = (10 * q * N ** (2 / 3) / Q**2) ** 3  # window variable kappa = 10
    fd = phase_voronoi_m(T, 1, 100, q, m, N, 0, Q, **DECAY_WINDOW)
    assert abs(fd.window["kappa"] - 10) < 1e-4 and not fd.in_window
    res = quad_oscillatory_1d(fd.descriptor)
    assert abs(res.value) < 1e-6 * fd.window["trivial_bound"]


def test_voronoi_m_edge_reported():
    T, Q, N, q = 1e4, 100.0, 1e6, 100
    fd = phase_voronoi_m(T, 1, 100, q, (q * N ** (2 / 3) / Q**2) ** 3, N, 0, Q)
    ratio = abs(quad_oscillatory_1d(fd.descriptor).value) / fd.window["trivial_bound"]
    assert 1e-4 < ratio <= 1


def _root_of_fprime(p, x0):
    a, b = p.support
    return optimize.brentq(lambda t: float(p.fprime(t)), a, b, xtol=1e-14 * x0, rtol=1e-15)


@pytest.mark.parametrize("m", [0.0, 1e3, 2.5e3])
def test_voronoi_n_stationary_point(m):
    fd = phase_voronoi_n(1e4, 1, 1e3, 3, 1, m, 5e3)
    p = fd.descriptor
    assert abs(_root_of_fprime(p, fd.x0) - fd.x0) / fd.x0 < 1e-8
    assert abs(float(p.fprime(fd.x0))) < 1e-10 * abs(float(p.fsecond(fd.x0))) * fd.x0
    assert abs(float(p.f(fd.x0)) - fd.f_x0) < 1e-10 * fd.f_x0


def test_voronoi_n_second_derivative_example():
    fd = phase_voronoi_n(1e4, 1, 1e3, 3, 1, 1e3, 5e3)
    p = fd.descriptor
    f2 = float(mpmath.diff(lambda u: mpmath.mpf(1e4 + 1e3) / (2 * mpmath.pi) / u
                           + 3 * (mpmath.cbrt(5e3) - mpmath.cbrt(1e3)) * mpmath.cbrt(u) / 3,
                           fd.x0, 2))
    assert abs(fd.f2_x0 - f2) / abs(f2) < 1e-6


def test_voronoi_n_degenerate():
    with pytest.raises(NoStationaryPoint):
        phase_voronoi_n(1e4, 1, 1e3, 3, 1, 5e3, 5e3)


def test_poisson_h_closed_forms():
    H = poisson_h_center(1e4, 1, 100, 5, 1, 8e3, 0)
    fd = phase_poisson_h(1e4, 1, 100, 5, H, 1, 8e3, 0)
    p = fd.descriptor
    assert fd.in_window and abs(fd.x0 - 1.5) < 1e-12
    assert abs(_root_of_fprime(p, fd.x0) - fd.x0) / fd.x0 < 1e-8
    assert abs(float(p.f(fd.x0)) - fd.f_x0) < 1e-10 * fd.f_x0


@pytest.mark.parametrize("factor", [100.0, 0.01])
def test_poisson_h_outside_window(factor):
    T, X = 1e4, 1e2
    H = poisson_h_center(T, 1, X, 5, 1, 8e3, 0)
    fd = phase_poisson_h(T, 1, X, 5, H, factor, 8e3, 0, **DECAY_WINDOW)
    assert not fd.in_window
    assert abs(quad_oscillatory_1d(fd.descriptor).value) < 1e-6 * fd.window["trivial_bound"]


def test_poisson_h_zero_numerator():
    fd = phase_poisson_h(1e4, 1, 100, 5, 300.0, 0.01, 1e3, 1e3)
    assert fd.x0 is None and not fd.in_window
    lin = 300.0 * 0.01 / 5
    want = scipy_oscillatory(lambda y: -lin * y, Bump(1.0, 2.0), 1.0, 2.0)
    assert abs(quad_oscillatory_1d(fd.descriptor).value - want) < 1e-10


def test_phase_J_generic():
    X, Q = pd.scales(1e4)
    fd = phase_J(*pd.j_args(1e4, 90.0, 100.0, 1, 1.5))
    p = fd.descriptor
    assert fd.in_window and abs(fd.x0 - 1.5) < 1e-12
    assert abs(_root_of_fprime(p, fd.x0) - fd.x0) / fd.x0 < 1e-8
    assert abs(float(p.f(fd.x0)) - fd.f_x0) < 1e-10 * abs(fd.f_x0)
    fd2 = float(mpmath.diff(lambda y: fd.window["B"] * mpmath.cbrt(y) - fd.window["C"] * y, fd.x0, 2))
    assert abs(fd.f2_x0 - fd2) / abs(fd2) < 1e-8


def test_phase_J_above_window():
    args = list(pd.j_args(1e4, 90.0, 100.0, 1, 1.5))
    m_hi = phase_J(*args).window["m_range"][1]
    args[8] = 10 * m_hi
    fd = phase_J(*args, **DECAY_WINDOW)
    assert not fd.in_window
    assert abs(quad_oscillatory_1d(fd.descriptor).value) < 1e-6 * fd.window["trivial_bound"]


def test_phase_J_equal_terms_has_no_stationary_point():
    # E2 = E1 leaves the linear term -C y alone: the closed form would give f = 0
    with pytest.raises(NoStationaryPoint):
        phase_J(1e4, 1, 100, 100, 90, 90, 1, 1, 1, 1, 111)


def test_phase_I_degenerate():
    with pytest.raises(DegenerateConfiguration):
        phase_I_2d(1e4, 80, 100, 120, 90, 90, 1, 1, 1, 1, 1, 111, 50, 123)


def test_phase_I_equal_xi_terms():
    # Xi2' = Xi2 with q2 != q2': choose xi2' so the two terms coincide
    T, r, q2, q2p = 1e4, 80.0, 90.0, 150.0
    xi2 = 300.0
    xi2p = ((T + r * xi2) * (q2p / q2) ** 2 - T) / r
    d = phase_I_2d(T, r, xi2, xi2p, q2, q2p, 1, 1, 1, 1, 1, 111, 50, 123)
    assert abs(d.f0) < 1e-12 and d.xi0 is None


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_phase_I_closed_forms(seed):
    rng = np.random.default_rng(seed)
    args, (xi0, y0) = pd.i_args(rng, 1e4)
    d = phase_I_2d(*args)
    assert d.in_window
    assert abs(d.xi0 - xi0) / xi0 < 1e-9 and abs(d.y0 - y0) / y0 < 1e-9
    assert abs(float(d.f(d.xi0, d.y0)) - d.f0) < 1e-9 * abs(d.f0)
    main = hormander_2d_main_term(d.f, d.u, 1.0, d.box)
    nx, ny = main.flags["x0"]
    assert abs(nx - d.xi0) / d.xi0 < 1e-6 and abs(ny - d.y0) / d.y0 < 1e-6
    with mpmath.workdps(40):
        fm = pd.i_phase_mp(args)
        hxx = mpmath.diff(fm, (d.xi0, d.y0), (2, 0))
        hxy = mpmath.diff(fm, (d.xi0, d.y0), (1, 1))
        hyy = mpmath.diff(fm, (d.xi0, d.y0), (0, 2))
        det = float(hxx * hyy - hxy**2)
    assert abs(d.det - det) / abs(det) < 1e-6
    assert np.allclose(d.hessian, [[float(hxx), float(hxy)], [float(hxy), float(hyy)]], rtol=1e-6)
    # the Hessian is negative definite, not a saddle
    assert d.det > 0 and d.hessian[0, 0] < 0 and main.flags["signature"] == -2


def test_phase_I_main_term_vs_quadrature():
    rng = np.random.default_rng(11)
    args, _ = pd.i_args(rng, 1e5)
    d = phase_I_2d(*args)
    X = args[-1]
    lam = math.sqrt(d.det) * X  # Hessian scale in the unit box (xi1 = X t)
    main = hormander_2d_main_term(d.f, d.u, 1.0, d.box).value
    ref = quad_oscillatory_2d(d.f, d.u, d.box, tol=1e-9 * X).value
    assert abs(main - ref) / abs(ref) < 20 / lam


def test_phase_I_beyond_window():
    rng = np.random.default_rng(2)
    args, _ = pd.i_args(rng, 1e4)
    d = phase_I_2d(*args)
    args = list(args)
    args[12] = d.window["q1_edge"] * args[10] * 10
    d2 = phase_I_2d(*args, **DECAY_WINDOW)
    assert not d2.in_window
    mass = quad_oscillatory_2d(lambda x, y: 0 * x, d2.u, d2.box).value.real
    val = quad_oscillatory_2d(d2.f, d2.u, d2.box, tol=1e-12 * args[-1]).value
    assert abs(val) < 1e-6 * mass


# ------------------------------------------------------------ cubic phase

def test_cubic_example():
    for dom, want in (((0.5, 2.0), 1.0), ((-2.0, -0.5), -1.0)):
        res = cubic_phase_analysis(CubicRootPhase(0, 3, 0, -1, dom))
        assert len(res.stationary_points) == 1
        assert abs(res.stationary_points[0] - want) < 1e-14
        p = CubicRootPhase(0, 3, 0, -1, dom)
        fd = float(mpmath.diff(lambda x: 0 - 3 * mpmath.cbrt(x) + 1 * x if x > 0
                               else 3 * mpmath.cbrt(-x) + x, want, 2))
        assert abs(res.f2[0] - fd) / abs(fd) < 1e-10
        assert abs(float(p.fprime(want))) < 1e-14


def test_cubic_double_root_degenerate():
    res = cubic_phase_analysis(CubicRootPhase(0, 1, 1, 1 / 3, (0.2, 5)))
    assert res.degenerate and res.f2 == (0.0,)


def test_cubic_negative_discriminant():
    p = CubicRootPhase(0, 3, 1, 1, (0.5, 100))  # c^2 - 3bd = -8, xi^(-1/3) = 1/3 at xi = 27
    res = cubic_phase_analysis(p)
    assert res.stationary_points == ()
    assert abs(res.min_abs_fprime - 8 / 9) < 1e-14 and abs(res.argmin - 27) < 1e-12
    xs = np.geomspace(0.5, 100, 200001)
    assert abs(np.min(np.abs(p.fprime(xs))) - 8 / 9) < 1e-9


def test_cubic_zero_leading():
    with pytest.raises(ZeroLeadingCoefficient):
        cubic_phase_analysis(CubicRootPhase(0, 0, 1, 1, (1, 2)))
    with pytest.raises(ValueError):
        CubicRootPhase(0, 1, 1, 1, (-1, 1))


def cubic_oracle(p: CubicRootPhase, n=200001):
    lo, hi = p.domain
    xs = np.linspace(lo, hi, n)
    d = p.fprime(xs)
    roots = [optimize.brentq(lambda t: float(p.fprime(t)), xs[i], xs[i + 1], xtol=1e-15, rtol=1e-15)
             for i in np.flatnonzero(np.sign(d[:-1]) * np.sign(d[1:]) < 0)]
    f2 = [float(mpmath.diff(lambda x: p.a - p.b * mpmath.cbrt(x) + p.c * mpmath.cbrt(x) ** 2 - p.d * x, r, 2))
          for r in roots]
    i = int(np.argmin(np.abs(d)))
    lo_i, hi_i = xs[max(i - 1, 0)], xs[min(i + 1, n - 1)]
    res = optimize.minimize_scalar(lambda t: abs(float(p.fprime(t))), bounds=(lo_i, hi_i),
                                   method="bounded", options={"xatol": 1e-13})
    return roots, f2, min(float(np.min(np.abs(d))), float(res.fun))


def random_cubic(rng):
    b = rng.choice([-1, 1]) * 10 ** rng.uniform(-1, 1)
    c = rng.normal()
    d = rng.normal()
    return CubicRootPhase(rng.normal(), b, c, d, (0.05, 20.0))


@pytest.mark.parametrize("seed", range(20))
def test_cubic_vs_dense_sampling(seed):
    p = random_cubic(np.random.default_rng(seed))
    res = cubic_phase_analysis(p)
    roots, f2, mn = cubic_oracle(p)
    assert len(roots) == len(res.stationary_points)
    for r, r2, a, b in zip(res.stationary_points, roots, res.f2, f2):
        assert abs(r - r2) / abs(r) < 1e-6
        assert abs(a - b) / abs(b) < 1e-6
    if roots:
        assert res.min_abs_fprime == 0
    else:
        assert abs(res.min_abs_fprime - mn) / mn < 1e-6
