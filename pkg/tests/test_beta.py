import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import special

from oracles import beta_cdf_quad, beta_inverse_brentq
from test_oracles import FROZEN_CDF, FROZEN_T99
from restorecast import BetaRestorationModel, beta_cdf, beta_inverse_cdf, beta_pdf, betainc, betainc_inv

shape = st.floats(0.3, 12.0)
unit = st.floats(1e-6, 1 - 1e-6)


@pytest.mark.parametrize("a, b, x, expected", FROZEN_CDF)
def test_cdf_matches_frozen_quadrature(a, b, x, expected):
    assert betainc(a, b, x) == pytest.approx(expected, abs=1e-12)


def test_cdf_against_quadrature_grid():
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(300):
        a, b = rng.uniform(0.3, 10.0, 2)
        x = rng.uniform(0.0, 1.0)
        worst = max(worst, abs(betainc(a, b, x) - beta_cdf_quad(a, b, x)))
    assert worst < 1e-9


def test_cdf_against_scipy_vectorized():
    rng = np.random.default_rng(3)
    x = rng.uniform(0, 1, 2000)
    for a, b in [(0.5, 0.5), (1.0, 1.772), (2.0, 2.0), (8.0, 0.7), (30.0, 25.0)]:
        np.testing.assert_allclose(betainc(a, b, x), special.betainc(a, b, x), atol=1e-12)


def test_named_values():
    assert BetaRestorationModel(1, 1, 70).cdf(35) == pytest.approx(0.5, abs=1e-15)
    two = BetaRestorationModel(2, 2, 68)
    assert two.cdf(34) == pytest.approx(0.5, abs=1e-15)
    assert two.cdf(17) == pytest.approx(0.15625, abs=1e-14)
    assert two.inverse_cdf(0.5) == pytest.approx(34, abs=1e-10)
    assert two.inverse_cdf(0.99) == pytest.approx(FROZEN_T99, abs=1e-9)


def test_cdf_clamps_outside_support():
    m = BetaRestorationModel(2, 3, 50)
    np.testing.assert_array_equal(beta_cdf(np.array([-5.0, 0.0, 50.0, 80.0]), m), [0, 0, 1, 1])
    assert beta_inverse_cdf(0.0, m) == 0.0 and beta_inverse_cdf(1.0, m) == 50.0


@pytest.mark.parametrize("bad", [(0, 1, 10), (1, -1, 10), (1, 1, 0), (1, 1, math.inf), (math.nan, 1, 5)])
def test_model_rejects_bad_parameters(bad):
    with pytest.raises(ValueError):
        BetaRestorationModel(*bad)


def test_inverse_rejects_out_of_range():
    with pytest.raises(ValueError):
        betainc_inv(2, 2, 1.5)


@given(shape, shape, unit)
def test_inverse_round_trip(a, b, q):
    x = betainc_inv(a, b, q)
    assert abs(betainc(a, b, x) - q) < 1e-9


@given(shape, shape, st.floats(0.01, 0.99))
def test_inverse_matches_bracketing_root(a, b, q):
    assert betainc_inv(a, b, q) == pytest.approx(beta_inverse_brentq(a, b, q), abs=1e-8)


@given(shape, shape, unit)
def test_reflection(a, b, x):
    assert betainc(a, b, x) + betainc(b, a, 1 - x) == pytest.approx(1.0, abs=1e-12)


@given(shape, shape, st.lists(st.floats(0, 1), min_size=2, max_size=20))
def test_monotone(a, b, xs):
    xs = np.sort(np.array(xs))
    assert np.all(np.diff(betainc(a, b, xs)) >= -1e-15)


def test_pdf_integrates_to_cdf():
    m = BetaRestorationModel(2.5, 1.8, 40)
    t = np.linspace(0, 40, 4001)
    area = np.trapezoid(beta_pdf(t, m), t)
    assert area == pytest.approx(1.0, abs=1e-5)
