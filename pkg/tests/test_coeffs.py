import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heavytraffic.coeffs import (
    CoefficientModel,
    envelope,
    farima_coeffs,
    fractional_coeffs,
    partial_sum,
)
from heavytraffic.exceptions import DomainError, HorizonError, ValidationError


def test_fractional_hand_values():
    np.testing.assert_allclose(fractional_coeffs(0.5, 4), [1, 0.5, 0.375, 0.3125], rtol=0, atol=1e-15)


def test_fractional_gamma_to_one():
    np.testing.assert_allclose(fractional_coeffs(1 - 1e-12, 4), [1, 1, 1, 1], atol=1e-11)
    m = CoefficientModel.fractional(1 - 1e-12)
    assert partial_sum(m, 5) == pytest.approx(5, abs=1e-10)


@pytest.mark.parametrize("gamma", [0.0, 1.0, -0.2, 1.5])
def test_fractional_domain(gamma):
    with pytest.raises(DomainError):
        fractional_coeffs(gamma, 3)


def test_regular_variation_ratio():
    g = fractional_coeffs(0.7, 200_001)
    assert g[200_000] / g[100_000] == pytest.approx(2 ** -0.3, abs=1e-3)


def test_gamma_closed_form():
    gamma = 0.37
    g = fractional_coeffs(gamma, 1001)
    i = np.arange(1001)
    from scipy.special import gammaln

    closed = np.exp(gammaln(i + gamma) - gammaln(gamma) - gammaln(i + 1))
    np.testing.assert_allclose(g, closed, rtol=1e-9)


@given(st.floats(0.01, 0.99), st.integers(2, 3000))
@settings(max_examples=40, deadline=None)
def test_fractional_positive_decreasing(gamma, n):
    g = fractional_coeffs(gamma, n)
    assert np.all(g > 0)
    assert np.all(np.diff(g) < 0)


def test_farima_reduces_to_fractional():
    m = CoefficientModel.farima(0.5, [1], [1])
    np.testing.assert_allclose(farima_coeffs(m, 4), [1, 0.5, 0.375, 0.3125], atol=1e-15)
    m = CoefficientModel.farima(0.63, [2.0, 1.0], [2.0, 1.0])
    np.testing.assert_allclose(farima_coeffs(m, 500), fractional_coeffs(0.63, 500), rtol=1e-12)


def test_farima_numerator_hand_values():
    m = CoefficientModel.farima(0.5, [1, 1], [1])
    np.testing.assert_allclose(farima_coeffs(m, 3), [1, 1.5, 0.875], atol=1e-15)


def test_farima_long_division_oracle():
    gamma, n = 0.6, 64
    m = CoefficientModel.farima(gamma, [1], [1, -0.5])
    with mpmath.workdps(40):
        frac = [mpmath.mpf(1)]
        for i in range(1, n):
            frac.append(frac[-1] * (i - 1 + mpmath.mpf(gamma)) / i)
        # division by 1 - x/2: c_i = frac_i + c_{i-1} / 2
        oracle = []
        prev = mpmath.mpf(0)
        for i in range(n):
            prev = frac[i] + prev / 2
            oracle.append(float(prev))
    np.testing.assert_allclose(farima_coeffs(m, n), oracle, rtol=1e-12)


@pytest.mark.parametrize("den", [[1, -1], [1, -2], [1, 0, 1], [1, -1.0000000001]])
def test_farima_rejects_bad_denominator(den):
    with pytest.raises(ValidationError):
        CoefficientModel.farima(0.5, [1], den)


def test_farima_rejects_zero_at_one():
    with pytest.raises(ValidationError):
        CoefficientModel.farima(0.5, [1, -1], [1])


def test_partial_sum_hand_value():
    m = CoefficientModel.fractional(0.5)
    assert partial_sum(m, 4) == pytest.approx(2.1875, abs=1e-15)
    assert partial_sum(m, 3.2) == partial_sum(m, 4)
    assert partial_sum(m, 0) == 0.0


def test_karamata_equivalent():
    gamma, t = 0.6, 10**6
    m = CoefficientModel.fractional(gamma)
    ratio = partial_sum(m, t) / (t * m.coefficient(t) / gamma)
    assert abs(ratio - 1) < 0.02


def test_partial_sum_doubling():
    m = CoefficientModel.fractional(0.45)
    assert partial_sum(m, 2 * 10**5) / partial_sum(m, 10**5) == pytest.approx(2**0.45, rel=0.01)


@given(st.floats(0.05, 0.95), st.integers(1, 5000))
@settings(max_examples=40, deadline=None)
def test_partial_sum_bounded_and_monotone(gamma, t):
    m = CoefficientModel.fractional(gamma)
    s = np.asarray(m.partial_sums(t))
    assert np.all(np.diff(s) > 0)
    assert s[-1] <= t * envelope(m).g_sup + 1e-9


def test_partial_sum_far_fractional_matches_mpmath():
    gamma = 0.9
    m = CoefficientModel.fractional(gamma, cache_limit=1000)
    with mpmath.workdps(40):
        for n in (1001, 5000, 10**4, 10**9, 10**17):
            exact = mpmath.rf(mpmath.mpf(n), gamma) / mpmath.gamma(1 + mpmath.mpf(gamma))
            assert m.partial_sum(n) == pytest.approx(float(exact), rel=1e-13)


def test_partial_sum_far_continuity():
    # closed-form continuation agrees with the cached prefix at the boundary
    for kind in ("fractional", "example"):
        near = CoefficientModel(kind, 0.8, cache_limit=4096)
        full = CoefficientModel(kind, 0.8, cache_limit=1 << 20)
        for n in (4097, 10_000, 300_000):
            assert near.partial_sum(n) == pytest.approx(full.partial_sum(n), rel=1e-11)
    nf = CoefficientModel.farima(0.7, [1, 0.3], [1, -0.4], cache_limit=4096)
    ff = CoefficientModel.farima(0.7, [1, 0.3], [1, -0.4], cache_limit=1 << 20)
    assert nf.partial_sum(500_000) == pytest.approx(ff.partial_sum(500_000), rel=1e-9)
    assert nf.coefficient(500_000) == pytest.approx(ff.coefficient(500_000), rel=1e-9)


def test_example_kind():
    m = CoefficientModel.example(0.7)
    g = np.asarray(m.coefficients(5))
    np.testing.assert_allclose(g, [1, 1, 2**-0.3, 3**-0.3, 4**-0.3])


def test_coefficients_read_only():
    g = CoefficientModel.fractional(0.5).coefficients(10)
    with pytest.raises(ValueError):
        g[0] = 2.0


def test_envelope_fractional():
    env = envelope(CoefficientModel.fractional(0.5))
    assert (env.g_sup, env.j_sup, env.g_neg, env.j_neg) == (1.0, 0, 0.0, None)


def test_envelope_explicit():
    vals = [0.5, -0.2, 1.3, 0.1, 0.05] + [0.04 * 0.9**k for k in range(50)]
    env = envelope(CoefficientModel.explicit(vals, gamma=0.5))
    assert env.g_sup == 1.3 and env.j_sup == 2
    assert env.g_neg == -0.2 and env.j_neg == 1


def test_envelope_farima_negative():
    m = CoefficientModel.farima(0.7, [1, -2], [1])
    env = envelope(m)
    g = np.asarray(m.coefficients(10_000))
    assert env.g_neg < 0
    assert env.g_neg == g.min()
    assert env.g_sup == g.max()


def test_envelope_horizon_too_small():
    # slowly decaying oscillation: with an AR root close to -1 the tail
    # keeps changing sign well beyond a short probe
    m = CoefficientModel.farima(0.3, [1], [1, 0.99])
    with pytest.raises(HorizonError, match="horizon too small"):
        envelope(m, probe_horizon=128)


def test_explicit_beyond_list():
    m = CoefficientModel.explicit([1.0, 0.5], gamma=0.5)
    with pytest.raises(DomainError):
        m.coefficients(3)
    assert math.isclose(m.partial_sum(2), 1.5)
