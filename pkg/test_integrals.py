import math

import mpmath
import pytest

from app.core.errors import QuadratureError
from app.models.params import QuadratureConfig
from app.services.integrals import (
    h_closed_form_alpha4,
    h_integral,
    integrate,
    k_closed_form,
    k_closed_form_mp,
    k_integral,
    q_function,
    scaled_q,
)

ALPHAS = (2.1, 2.5, 3.0, 3.5, 4.0, 5.0, 6.0)


def test_k_alpha4_n1():
    assert k_integral(4.0, 1) == pytest.approx(math.pi ** 2 / 2, rel=1e-8)


def test_k_alpha35_n1():
    expected = 2 * math.pi ** 2 / (3.5 * math.sin(2 * math.pi / 3.5))
    assert k_integral(3.5, 1) == pytest.approx(expected, rel=1e-8)
    assert expected == pytest.approx(5.785, abs=1e-3)


@pytest.mark.parametrize("alpha", ALPHAS)
@pytest.mark.parametrize("n", [1, 2, 3, 5, 8, 12])
def test_k_quadrature_matches_beta_form(alpha, n):
    assert k_integral(alpha, n) == pytest.approx(k_closed_form(alpha, n), rel=1e-7)


def test_k_mp_matches_float_closed_form():
    with mpmath.workdps(40):
        assert float(k_closed_form_mp(3.5, 7)) == pytest.approx(k_closed_form(3.5, 7), rel=1e-12)


def test_k_increases_with_n():
    assert k_integral(4.0, 2) > k_integral(4.0, 1)


@pytest.mark.parametrize("alpha", ALPHAS)
def test_joint_slots_beat_independent_bound(alpha):
    # n·K(α,1) - K(α,n) > 0 for every n > 1
    single = k_integral(alpha, 1)
    for n in range(2, 13):
        assert n * single - k_integral(alpha, n) > 0


@pytest.mark.parametrize("alpha,n", [(2.0, 1), (1.5, 1), (3.0, 0)])
def test_k_rejects_bad_arguments(alpha, n):
    with pytest.raises(ValueError):
        k_integral(alpha, n)


def test_h_closed_form_alpha4_values():
    assert h_integral(1.0, 4.0) == pytest.approx(math.pi / 8, rel=1e-8)
    assert h_integral(4.0, 4.0) == pytest.approx(1.1071487, rel=1e-6)
    assert h_closed_form_alpha4(1.0) == pytest.approx(math.pi / 8, rel=1e-12)


@pytest.mark.parametrize("threshold", [0.01, 0.5, 1.0, 3.0, 20.0])
def test_h_quadrature_matches_alpha4_form(threshold):
    assert h_integral(threshold, 4.0) == pytest.approx(h_closed_form_alpha4(threshold), rel=1e-8)


def test_h_vanishes_for_tiny_threshold():
    assert h_integral(1e-9, 4.0) < 1e-8


def test_h_rejects_nonpositive_threshold():
    with pytest.raises(ValueError):
        h_integral(0.0, 4.0)


def test_q_function_and_scaled_form():
    assert q_function(0.0) == pytest.approx(0.5)
    assert q_function(1.959964) == pytest.approx(0.025, rel=1e-5)
    assert scaled_q(2.0) == pytest.approx(q_function(2.0) * math.exp(2.0), rel=1e-12)
    # stays finite where e^{x²/2} alone would overflow
    assert 0 < scaled_q(60.0) < 0.01


def test_integrate_reports_missed_tolerance():
    starved = QuadratureConfig(epsabs=1e-12, epsrel=1e-12, limit=1)
    with pytest.raises(QuadratureError):
        integrate(lambda x: math.sin(200.0 * x), 0.0, 50.0, starved, label="oscillatory")


def test_integrate_plain_value():
    assert integrate(lambda x: math.exp(-x), 0.0, math.inf) == pytest.approx(1.0, rel=1e-10)
