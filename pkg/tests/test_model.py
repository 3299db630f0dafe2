import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nlch import ModelParams, a_transform, a_transform_inv, matano_bounds, matano_points
from nlch.errors import DegeneratePotential, NonPositiveCoefficient, OutOfDomain
from nlch.model import (
    CoefficientFn,
    convex_part_eval,
    potential_eval,
    safeguarded_eval,
    validate_coefficient,
)

mp.mp.dps = 40


def psi_ref(s, theta=1, theta0=2):
    s = mp.mpf(s)
    return theta / 2 * ((1 + s) * mp.log(1 + s) + (1 - s) * mp.log(1 - s)) - theta0 / 2 * s**2


def dpsi_ref(s, theta=1, theta0=2):
    return mp.diff(lambda x: psi_ref(x, theta, theta0), mp.mpf(s))


# -- coefficients ---------------------------------------------------------------

def test_constant_coefficient_bounds():
    c = validate_coefficient("constant", [1.0])
    assert (c.min_on_interval, c.max_on_interval) == (1.0, 1.0)
    assert c.is_constant
    assert CoefficientFn.constant(2.5)(0.3) == 2.5


def test_quadratic_coefficient_bounds():
    c = validate_coefficient("polynomial", [1.0, 0.0, 1.0])
    assert c.min_on_interval == pytest.approx(1.0, abs=1e-12)
    assert c.max_on_interval == pytest.approx(2.0, abs=1e-12)


def test_negative_coefficient_rejected():
    with pytest.raises(NonPositiveCoefficient):
        validate_coefficient("polynomial", [0.5, -1.0, 0.0])


def test_interior_minimum_detected():
    # 1 - 4.2 s^2 + 4.2 s^4 equals 1 at both ends but dips to -0.05 inside
    with pytest.raises(NonPositiveCoefficient):
        validate_coefficient("polynomial", [1.0, 0.0, -4.2, 0.0, 4.2])


def test_coefficient_derivatives():
    c = validate_coefficient("polynomial", [1.0, 0.2, 0.5])
    assert c.derivative(0.4, 1) == pytest.approx(0.2 + 1.0 * 0.4)
    assert c.derivative(0.4, 2) == pytest.approx(1.0)
    assert c.derivative(0.4, 3) == 0.0


def test_theta_must_be_below_theta0():
    with pytest.raises(DegeneratePotential):
        ModelParams(theta=2.0, theta0=1.0)


# -- potential ------------------------------------------------------------------

def test_potential_values(params):
    assert potential_eval(params, 0.0, 0) == 0.0
    assert potential_eval(params, 0.0, 2) == pytest.approx(-1.0, abs=1e-15)
    assert potential_eval(params, 0.5, 1) == pytest.approx(float(0.5 * mp.log(3) - 1), abs=1e-14)
    assert potential_eval(params, 0.5, 1) == pytest.approx(-0.4506939, abs=1e-7)
    assert potential_eval(params, 0.3, 0) == pytest.approx(float(psi_ref(0.3)), abs=1e-15)


def test_convex_part_values(params):
    assert convex_part_eval(params, 0.0, 1) == 0.0
    assert convex_part_eval(params, 0.9, 1) == pytest.approx(float(0.5 * mp.log(19)), abs=1e-14)
    assert convex_part_eval(params, 0.0, 2) == 1.0


def test_potential_out_of_domain(params):
    with pytest.raises(OutOfDomain):
        potential_eval(params, 1.0, 1)


@settings(max_examples=50, deadline=None)
@given(st.floats(-0.999, 0.999))
def test_potential_derivative_matches_oracle(s):
    p = ModelParams()
    assert potential_eval(p, s, 1) == pytest.approx(float(dpsi_ref(s)), rel=1e-12, abs=1e-13)


def test_potential_lower_bounds_sampled(params, rng):
    s = rng.uniform(-1, 1, 100_000)
    s = s[np.abs(s) < 1]
    assert np.all(potential_eval(params, s, 2) >= params.theta - params.theta0 - 1e-12)
    assert np.all(convex_part_eval(params, s, 2) >= params.theta)


def test_safeguarded_eval(params):
    v, clamped = safeguarded_eval(params, 0.5, 1)
    assert not clamped and v == potential_eval(params, 0.5, 1)
    v, clamped = safeguarded_eval(params, 1.2, 1)
    s = 1 - 1e-9
    assert clamped
    assert v == pytest.approx(convex_part_eval(params, s, 1) - 2.0 * s, rel=1e-14)
    p6 = ModelParams(clamp_delta=1e-6)
    v, clamped = safeguarded_eval(p6, -1.0, 0)
    assert clamped
    assert v == pytest.approx(float(psi_ref(mp.mpf(-1) + mp.mpf("1e-6"))), rel=1e-12)


# -- A-transform ----------------------------------------------------------------

def test_a_transform_identity_for_unit_a(params):
    s = np.linspace(-1, 1, 11)
    np.testing.assert_array_equal(a_transform(params, s), s)


def test_a_transform_quadratic():
    p = ModelParams(coeff_a=validate_coefficient("polynomial", [1.0, 0.0, 1.0]))
    ref = float((mp.sqrt(2) + mp.asinh(1)) / 2)
    assert a_transform(p, 1.0) == pytest.approx(ref, abs=1e-12)
    assert ref == pytest.approx(1.1477935, abs=1e-7)
    assert a_transform_inv(p, a_transform(p, 0.37)) == pytest.approx(0.37, abs=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.floats(-1.0, 1.0))
def test_a_transform_round_trip(s):
    p = ModelParams(coeff_a=validate_coefficient("polynomial", [1.0, 0.3, 0.5]))
    assert a_transform_inv(p, a_transform(p, s)) == pytest.approx(s, abs=1e-10)


# -- Matano points --------------------------------------------------------------

def test_matano_points(params):
    s_star, alpha0, beta0 = matano_points(params)
    assert s_star == pytest.approx(float(mp.sqrt(0.5)), abs=1e-12)
    ref = float(0.5 * mp.log((1 + mp.sqrt(0.5)) / (1 - mp.sqrt(0.5))) - 2 * mp.sqrt(0.5))
    assert potential_eval(params, s_star, 1) == pytest.approx(ref, abs=1e-12)
    assert ref == pytest.approx(-0.5328400, abs=1e-7)
    # beta0 solves Psi'(beta0) = Psi'(-s_star) on (s_star, 1)
    root = mp.findroot(lambda x: mp.atanh(x) - 2 * x + ref, (0.9, 0.999),
                       solver="anderson")
    assert beta0 == pytest.approx(float(root), abs=1e-11)
    assert alpha0 == pytest.approx(-beta0, abs=1e-12)


def test_matano_bounds_rule(params):
    _, alpha0, beta0 = matano_points(params)
    assert matano_bounds(params, 0.0) == pytest.approx((alpha0, beta0), abs=1e-14)
    assert matano_bounds(params, 0.99) == (0.99, 0.99)
    assert matano_bounds(params, -0.995) == (-0.995, -0.995)
    lo, hi = matano_bounds(params, beta0)
    assert lo == pytest.approx(beta0) and hi == pytest.approx(beta0)
