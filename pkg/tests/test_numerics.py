import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from etfmanova.numerics import (
    NumericsError,
    RngStream,
    herm_eig,
    herm_eigvals,
    integrate_edge_singular,
    inv_trace_pd,
    logdet_pd,
    loglog_fit,
    loglog_fit_loglog,
    parse_rational,
    simpson,
)


def test_parse_rational_forms():
    assert parse_rational("3/7") == Fraction(3, 7)
    assert parse_rational(" 2 ") == Fraction(2)
    assert parse_rational("0.25") == Fraction(1, 4)
    assert parse_rational(5) == Fraction(5)


def test_herm_eig_diagonal_and_order():
    w, v = herm_eig(np.diag([3.0, 1.0, 2.0]))
    np.testing.assert_allclose(w, [1, 2, 3])
    np.testing.assert_allclose(np.abs(v.T @ np.diag([3.0, 1.0, 2.0]) @ v), np.diag([1, 2, 3]), atol=1e-14)


def test_herm_eig_complex_pauli():
    y = np.array([[0, -1j], [1j, 0]])
    np.testing.assert_allclose(herm_eigvals(y), [-1, 1], atol=1e-15)


def test_herm_rejects_non_hermitian():
    with pytest.raises(NumericsError):
        herm_eigvals(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(NumericsError):
        herm_eigvals(np.ones((2, 3)))


def test_herm_absorbs_roundoff():
    a = np.array([[1.0, 0.5 + 1e-15], [0.5, 1.0]])
    np.testing.assert_allclose(herm_eigvals(a), [0.5, 1.5], atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=1, max_value=12), st.integers(min_value=0, max_value=2**32))
def test_herm_eig_reconstructs(n, seed):
    gen = np.random.default_rng(seed)
    a = gen.standard_normal((n, n)) + 1j * gen.standard_normal((n, n))
    h = a + a.conj().T
    w, v = herm_eig(h)
    assert np.all(np.diff(w) >= 0)
    np.testing.assert_allclose(v @ np.diag(w) @ v.conj().T, h, atol=1e-10 * max(1, np.abs(h).max()))
    np.testing.assert_allclose(v.conj().T @ v, np.eye(n), atol=1e-12)


def test_logdet_and_inverse_trace():
    g = np.diag([1.0, 2.0, 4.0])
    assert logdet_pd(g) == pytest.approx(math.log(8))
    assert inv_trace_pd(g) == pytest.approx(1.75)
    assert inv_trace_pd(np.diag([0.0, 1.0])) == math.inf
    assert logdet_pd(np.diag([0.0, 1.0])) == -math.inf


def test_edge_singular_quadrature_arcsine():
    # 1/sqrt(x(1-x)) integrates to pi; 1 - x cancels near x = 1, which
    # limits the attainable accuracy to about 1e-9
    val = integrate_edge_singular(lambda x: 1 / np.sqrt(x * (1 - x)), 0.0, 1.0, 1e-9)
    assert val == pytest.approx(math.pi, abs=1e-9)


def test_edge_singular_quadrature_semicircle():
    val = integrate_edge_singular(lambda x: np.sqrt(4 - x**2) / (2 * np.pi), -2.0, 2.0)
    assert val == pytest.approx(1.0, abs=1e-10)


def test_simpson_polynomial_exact():
    assert simpson(lambda x: x**3 - x, 0.0, 2.0) == pytest.approx(2.0, abs=1e-13)
    assert simpson(np.sin, 1.0, 1.0) == 0.0


def test_rng_stream_determinism_and_independence():
    a = RngStream(42, 3).generator().random(5)
    b = RngStream(42, 3).generator().random(5)
    c = RngStream(42, 4).generator().random(5)
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, c)
    assert RngStream(1).derive(2, 5).stream_index == (2 << 16) | 5
    with pytest.raises(NumericsError):
        RngStream(-1)


def test_loglog_fit_recovers_power_law():
    ns = np.array([100, 200, 400, 800])
    fit = loglog_fit(ns, 3.0 * ns**-0.5)
    assert fit.slope == pytest.approx(-0.5, abs=1e-12)
    assert fit.intercept == pytest.approx(math.log(3), abs=1e-12)
    assert fit.slope_stderr == 0.0
    assert fit.r_squared == pytest.approx(1.0)


def test_loglog_fit_with_loglog_term():
    ns = np.array([50.0, 100, 300, 1000, 5000])
    ys = 2.0 * ns**-0.7 * np.log(ns) ** -1.5
    res = loglog_fit_loglog(ns, ys)
    assert res["b"] == pytest.approx(0.7, abs=1e-9)
    assert res["a"] == pytest.approx(1.5, abs=1e-9)


def test_loglog_fit_needs_positive_values():
    with pytest.raises(NumericsError):
        loglog_fit([1, 2, 3], [1, 0, 2])
