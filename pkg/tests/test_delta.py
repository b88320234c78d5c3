import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from momentlab.delta import build_expansion, delta_eval, g_probe
from momentlab.errors import DegenerateSupport, QuadratureFailure


@pytest.mark.parametrize("Q", [4, 10, 12.5, 20, 33])
def test_weight_normalization(Q):
    e = build_expansion(Q)
    assert abs(e.mass() - 1) < 1e-12
    assert e.w(Q / 2) == 0 and e.w(Q) == 0 and e.w(Q + 1) == 0


def test_small_Q_support():
    assert build_expansion(4).qmax == 4
    assert abs(build_expansion(3).mass() - 1) < 1e-12  # d = 2 is interior
    with pytest.raises(DegenerateSupport):
        build_expansion(1)


@pytest.mark.parametrize("n, Q, want", [(0, 20, 1.0), (7, 20, 0.0), (-3, 12, 0.0), (1, 4, 0.0)])
def test_delta_examples(n, Q, want):
    assert abs(delta_eval(n, build_expansion(Q)) - want) < 1e-8


@pytest.mark.parametrize("Q", [8, 16])
def test_delta_reconstruction_full_range(Q):
    e = build_expansion(Q)
    for n in range(-Q * Q // 4, Q * Q // 4 + 1):
        assert abs(delta_eval(n, e) - (n == 0)) < 1e-8


@settings(max_examples=60, deadline=None)
@given(st.integers(8, 40), st.data())
def test_delta_even_and_exact(Q, data):
    e = build_expansion(Q)
    n = data.draw(st.integers(-Q * Q // 4, Q * Q // 4))
    assert delta_eval(n, e) == delta_eval(-n, e)
    assert abs(delta_eval(n, e) - (n == 0)) < 1e-8


def test_delta_never_uses_moduli_above_Q(monkeypatch):
    import momentlab.delta as dm
    seen = []
    orig = dm._delta_q_terms

    def spy(q, absn, exp):
        seen.append(q)
        return orig(q, absn, exp)

    monkeypatch.setattr(dm, "_delta_q_terms", spy)
    e = build_expansion(12.7)
    for n in (0, 5, 40):
        dm.delta_eval(n, e)
    assert max(seen) <= 12.7


def test_delta_rejects_n_beyond_safe_range():
    with pytest.raises(ValueError):
        delta_eval(10**4, build_expansion(10))


def test_g_probe_small_q_near_one():
    e = build_expansion(20)
    g = g_probe(1, 0.0, e)
    assert abs(g.value - 1) < 0.01
    assert abs(g.delta_mass) < 1e-3


def test_g_probe_decay_recorded():
    e = build_expansion(20)
    g10 = g_probe(2, 10.0, e)
    # |g| <= C |x|^{-2}; the observed constant C = |g| * 100 is about 1.3.
    assert abs(g10.value) * 100 < 5
    assert math.isfinite(g_probe(20, 0.0, e).value)


def test_g_probe_budget():
    with pytest.raises(QuadratureFailure):
        g_probe(1, 1e6, build_expansion(20))
