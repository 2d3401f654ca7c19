import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from affine_husimi import DomainError, GammaRangeError, PoleError, coherent_norm_constant, gamma, log_gamma

mpmath.mp.dps = 30


@settings(max_examples=60, deadline=None)
@given(st.floats(-40.0, 120.0), st.floats(-80.0, 80.0))
def test_log_gamma_matches_mpmath(x, y):
    z = complex(x, y)
    if abs(y) < 1e-3 and x <= 0 and abs(x - round(x)) < 1e-3:
        return
    ref = complex(mpmath.loggamma(mpmath.mpc(x, y)))
    got = log_gamma(z)
    # principal branches agree; compare modulo 2 pi i only where they might not
    assert abs(got.real - ref.real) <= 1e-10 * max(1.0, abs(ref.real))
    dphase = (got.imag - ref.imag + np.pi) % (2 * np.pi) - np.pi
    assert abs(dphase) <= 1e-9 * max(1.0, abs(ref.imag))


@settings(max_examples=40, deadline=None)
@given(st.floats(0.1, 30.0), st.floats(-30.0, 30.0))
def test_recurrence(x, y):
    z = complex(x, y)
    assert abs(log_gamma(z + 1) - log_gamma(z) - np.log(z)) < 1e-10 * max(1.0, abs(log_gamma(z)))


def test_reflection_formula():
    z = np.array([0.3 + 0.7j, -2.5 + 1.0j, 0.5 + 12.0j])
    lhs = gamma(z) * gamma(1 - z)
    np.testing.assert_allclose(lhs, np.pi / np.sin(np.pi * z), rtol=1e-12)


def test_half_line_values():
    assert np.isclose(gamma(0.5), np.sqrt(np.pi), rtol=1e-15)
    assert np.isclose(gamma(5.0), 24.0, rtol=1e-14)


@pytest.mark.parametrize("z", [0, -1, -7])
def test_poles_raise(z):
    with pytest.raises(PoleError) as info:
        log_gamma(z)
    assert info.value.pole == z


def test_domain_and_overflow():
    with pytest.raises(DomainError):
        log_gamma(-60.5)
    with pytest.raises(GammaRangeError) as info:
        gamma(200.0)
    assert np.isclose(info.value.log_value.real, float(mpmath.loggamma(200)), rtol=1e-14)


def test_array_input_keeps_shape():
    z = np.linspace(1, 3, 6).reshape(2, 3)
    assert log_gamma(z).shape == (2, 3)


@pytest.mark.parametrize("h, value", [(1.0, 2.0), (2.0, 1.0)])
def test_coherent_constant_closed_forms(h, value):
    assert np.isclose(coherent_norm_constant(h), value, rtol=1e-14)


@pytest.mark.parametrize("h", [0.3, 0.5, 1.7])
def test_coherent_constant_normalizes(h):
    # ||C x^{1/h} e^{-x/h}||^2 = C^2 Gamma(2/h + 1) (h/2)^{2/h + 1}
    k = 2 / h + 1
    ref = float(mpmath.gamma(k) * mpmath.mpf(h / 2) ** k)
    assert np.isclose(coherent_norm_constant(h) ** 2 * ref, 1.0, rtol=1e-12)
