import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracle import random_params, random_state4, rhs3, rhs4
from sirsi.model import (Params, ParameterError, State3, check_state3, check_state4, r0,
                         rhs_sirsi_vaccine_3d, rhs_sirsi_vaccine_4d, vector_field_3d, vector_field_4d)


def test_4d_matches_flow_oracle():
    rng = np.random.default_rng(1)
    for _ in range(500):
        p = random_params(rng)
        x = random_state4(rng)
        np.testing.assert_allclose(rhs_sirsi_vaccine_4d(Params(**p), x), rhs4(p, x), rtol=0, atol=1e-15)


def test_3d_matches_flow_oracle():
    rng = np.random.default_rng(2)
    for _ in range(500):
        p = random_params(rng)
        y = random_state4(rng)[:3]
        np.testing.assert_allclose(rhs_sirsi_vaccine_3d(Params(**p), y), rhs3(p, y), rtol=0, atol=1e-15)


rates = st.floats(0.0, 2.0, allow_nan=False)


@settings(max_examples=300, deadline=None)
@given(rates, rates, rates, st.floats(0.0, 1.0), rates, rates, rates, rates,
       st.lists(st.floats(0.0, 1.0), min_size=4, max_size=4).filter(lambda v: sum(v) > 1e-6))
def test_total_population_is_conserved(mu, gamma, alpha, theta, b1, b2, b3, omega, raw):
    x = np.array(raw) / sum(raw)
    d = rhs_sirsi_vaccine_4d(Params(mu, gamma, alpha, theta, b1, b2, b3, omega), x)
    assert abs(sum(d)) < 1e-12 * (1 + max(map(abs, d)))


def test_reduction_agrees_with_full_system_pointwise():
    rng = np.random.default_rng(3)
    for _ in range(200):
        p = Params(**random_params(rng))
        x = random_state4(rng)
        d4 = rhs_sirsi_vaccine_4d(p, x)
        d3 = rhs_sirsi_vaccine_3d(p, x[:3])
        np.testing.assert_allclose(d3, d4[:3], atol=1e-15)


def test_vector_fields_match_named_rhs():
    p = Params(1e-4, 0.05, 0.8, 0.3, 0.1, 0.2, 0.05, 0.01)
    y = (0.7, 0.1, 0.05)
    assert vector_field_3d(p)(3.0, y) == pytest.approx(tuple(rhs_sirsi_vaccine_3d(p, y)), abs=1e-16)
    x = (0.7, 0.1, 0.05, 0.15)
    assert vector_field_4d(p)(3.0, x) == pytest.approx(tuple(rhs_sirsi_vaccine_4d(p, x)), abs=1e-16)


def test_theta_callable_overrides_constant():
    p = Params(1e-4, 0.05, 0.8, 0.3, 0.1, 0.2, 0.05)
    y = (0.7, 0.1, 0.05)
    f = vector_field_3d(p, theta=lambda t: 0.6 if t > 1 else 0.3)
    assert f(0.0, y) == pytest.approx(tuple(rhs_sirsi_vaccine_3d(p, y)))
    assert f(2.0, y) == pytest.approx(tuple(rhs_sirsi_vaccine_3d(p.with_(theta=0.6), y)))


def test_disease_free_simplex_face_is_invariant():
    p = Params(1e-4, 0.05, 0.8, 0.3, 0.1, 0.2, 0.05, 0.01)
    d = rhs_sirsi_vaccine_4d(p, (0.6, 0.0, 0.0, 0.4))
    assert d.i == 0.0 and d.sick == 0.0


def test_r0_arithmetic():
    p = Params(0.000027, 0.1, 0.775985, 0.415355, 0.2, 0.2, 0.047847)
    assert r0(p) == pytest.approx(0.775985 * (1 - 0.415355) / (0.4 + 0.000027), rel=1e-15)
    assert r0(p.with_(omega=0.3)) == r0(p)
    assert r0(p.with_(theta=1.0)) == 0.0


def test_r0_undefined_without_outflow():
    with pytest.raises(ParameterError):
        r0(Params(0.0, 0.1, 0.5, 0.2, 0.0, 0.0, 0.1))


@pytest.mark.parametrize("field,value", [("mu", -1e-6), ("gamma", -0.1), ("omega", -0.01),
                                         ("theta", 1.5), ("theta", -0.1), ("alpha", math.nan),
                                         ("beta2", math.inf), ("beta1", "0.2")])
def test_invalid_params_rejected(field, value):
    base = dict(mu=1e-4, gamma=0.05, alpha=0.8, theta=0.3, beta1=0.1, beta2=0.2, beta3=0.05)
    base[field] = value
    with pytest.raises(ParameterError):
        Params(**base)


def test_parameter_error_is_value_error():
    assert issubclass(ParameterError, ValueError)


def test_state_checks():
    assert check_state4((0.5, 0.2, 0.1, 0.2)).r == 0.2
    with pytest.raises(ValueError):
        check_state4((0.5, 0.2, 0.1, 0.3))
    with pytest.raises(ValueError):
        check_state4((1.2, -0.2, 0.0, 0.0))
    with pytest.raises(ValueError):
        check_state3((0.9, 0.2, 0.0))
    with pytest.raises(ValueError):
        check_state3((0.5, math.nan, 0.0))
    assert State3(0.5, 0.2, 0.1).lift().r == pytest.approx(0.2)
