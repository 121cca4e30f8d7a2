import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from carnotkit.errors import DomainError, RangeError
from carnotkit.spaces import (
    F_phi,
    NFunction,
    SampledScalarField,
    build_phi,
    check_integrability_condition,
    exponential,
    luxemburg_norm,
    monomial,
    parse_nfunction,
    power,
    power_log,
    young_conjugate,
)

T = np.logspace(-3, 3, 61)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0, 6.0])
def test_power_conjugate(p):
    q = p / (p - 1)
    np.testing.assert_allclose(young_conjugate(power(p))(T), T ** q / q, rtol=1e-8)


def test_exponential_conjugate():
    np.testing.assert_allclose(young_conjugate(exponential())(T), (1 + T) * np.log1p(T) - T, rtol=1e-8)


@given(st.floats(1e-3, 1e3), st.floats(1e-3, 1e3))
def test_young_inequality(s, t):
    for A in (power(2.5), exponential()):
        assert s * t <= float(A(s)) + float(young_conjugate(A)(t)) * (1 + 1e-9) + 1e-12


@pytest.mark.parametrize("A, top", [(power(2), 3), (power(3), 3), (power(1.5), 3), (exponential(), 1.3),
                                     (power_log(2, 1), 3)])
def test_conjugate_involution(A, top):
    # the double conjugate of exp is only tabulated up to log(1 + 1e12) ~ 27.6
    t = np.logspace(-3, top, 61)
    np.testing.assert_allclose(young_conjugate(young_conjugate(A))(t), A(t), rtol=1e-3)


def test_conjugate_grid_stops_at_last_slope():
    grid = young_conjugate(power(1.5)).grid
    assert grid[-1] < 1.5 * 1e12 ** 0.5
    assert grid[0] == power(1.5).grid[0]


def test_conjugate_range_error():
    A = NFunction(lambda t: t ** 1.01, "slow", grid=np.logspace(-3, 3, 200))
    with pytest.raises(RangeError):
        young_conjugate(A)(np.array([5.0]))


@given(arrays(np.float64, st.integers(1, 40), elements=st.floats(-20, 20, allow_nan=False)),
       st.sampled_from([1.5, 2.0, 3.0, 4.0]))
def test_luxemburg_power(vals, p):
    w = np.linspace(0.05, 1.0, len(vals))
    u = SampledScalarField(vals, w)
    ref = p ** (-1 / p) * float(np.dot(w, np.abs(vals) ** p)) ** (1 / p)
    assert luxemburg_norm(power(p), u) == pytest.approx(ref, rel=1e-10, abs=1e-300)


def test_luxemburg_is_gauge():
    u = SampledScalarField([0.3, -2.0, 5.0], [0.2, 0.5, 0.1])
    for A in (exponential(), power_log(2, 1), monomial(3)):
        lam = luxemburg_norm(A, u)
        assert float(np.dot(u.weights, A(np.abs(u.values) / lam))) == pytest.approx(1.0, rel=1e-10)
        assert luxemburg_norm(A, u.map(lambda v: 3 * v)) == pytest.approx(3 * lam, rel=1e-10)


@pytest.mark.parametrize("p,verdict", [(2, "fails"), (3, "fails"), (4, "fails"), (4.5, "holds"), (5, "holds"),
                                       (6, "holds")])
def test_integrability_table(p, verdict):
    rep = check_integrability_condition(monomial(p), 4.0)
    assert rep.verdict == verdict
    assert rep.dual_verdict == verdict


def test_integrability_value_frozen():
    # int_1^inf (t / t^6)^(1/3) dt = 3/2
    rep = check_integrability_condition(monomial(6), 4.0)
    assert rep.integral == pytest.approx(1.5, rel=1e-8)
    assert rep.tail_exponent == pytest.approx(-5 / 3, abs=1e-6)


def test_integrability_power_log():
    # t^4 log(1+t)^beta: the tail behaves like t^-1 log^(-beta/3)
    assert check_integrability_condition(power_log(4, 4), 4.0).verdict == "holds"
    assert check_integrability_condition(power_log(4, 2), 4.0).verdict == "fails"
    assert check_integrability_condition(exponential(), 4.0).verdict == "holds"


def test_build_phi_power_frozen():
    # A = t^6/6 is replaced by t^2.5/6 on [0, 1]; both pieces integrate in closed form
    ph = build_phi(power(6), 1.0, 4.0)
    assert ph.modified and ph.q == 2.5
    assert ph.base_integral == pytest.approx(6 ** (1 / 3) * (2 + 1.5), rel=1e-8)
    ph2 = build_phi(power(6), 2.0, 4.0)
    assert ph2.integral == pytest.approx(2.0 ** (-4 / 3) * ph.base_integral, rel=1e-12)


@given(st.floats(1e-4, 1e4), st.floats(0.25, 4.0))
def test_F_phi_identity(s, lam):
    ph = build_phi(exponential(), lam, 4.0)
    assert float(ph.F(np.array([s]))[0]) == pytest.approx(float(ph.A(lam * s)), rel=1e-12)


def test_build_phi_rejects_failing_A():
    with pytest.raises(DomainError):
        build_phi(monomial(3), 1.0, 4.0)


def test_F_phi_zero_and_domain():
    assert F_phi(lambda t: t, 0.0, 3.0) == 0.0
    with pytest.raises(DomainError):
        F_phi(lambda t: t, -1.0, 3.0)


@pytest.mark.parametrize("spec,name", [("power:3", "power:3"), ("monomial:2.5", "monomial:2.5"), ("exp", "exp"),
                                       ("power-log:4,4", "power-log:4,4")])
def test_parse(spec, name):
    A = parse_nfunction(spec)
    assert A.name == name
    A.validate()


@pytest.mark.parametrize("spec", ["power", "power:1", "cosh", "power-log:4"])
def test_parse_rejects(spec):
    with pytest.raises(DomainError):
        parse_nfunction(spec)


def test_validate_rejects_non_nfunction():
    with pytest.raises(DomainError):
        NFunction(lambda t: t, "linear").validate()
    assert math.isclose(float(exponential()(1.0)), math.e - 2)
