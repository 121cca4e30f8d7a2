import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from carnotkit.errors import DomainError
from carnotkit.spaces import (
    SampledScalarField,
    distribution_function,
    lorentz_Q1_norm,
    lp_norm,
    rearrangement,
)

values = arrays(np.float64, st.integers(1, 60), elements=st.floats(-50, 50, allow_nan=False))
Qs = st.floats(1.2, 8.0)


def field_from(vals, seed=0):
    w = np.random.default_rng(seed).uniform(0.01, 2.0, size=len(vals))
    return SampledScalarField(vals, w)


def test_two_step_frozen():
    # g* = 3 on [0, 0.5), 1 on [0.5, 2): Q (3 * 0.5^(1/Q) + 1 * (2^(1/Q) - 0.5^(1/Q)))
    f = SampledScalarField([1.0, -3.0], [1.5, 0.5])
    Q = 2.0
    exact = Q * (3 * 0.5 ** 0.5 + (2 ** 0.5 - 0.5 ** 0.5))
    for m in ("rearrangement", "layercake"):
        assert lorentz_Q1_norm(f, Q, m) == pytest.approx(exact, rel=1e-14)


@given(st.floats(0.01, 10), st.floats(0.01, 10), Qs, st.integers(1, 40))
def test_indicator(c, m, Q, k):
    f = SampledScalarField(np.full(k, c), m / k)
    for meth in ("rearrangement", "layercake"):
        assert lorentz_Q1_norm(f, Q, meth) == pytest.approx(c * Q * m ** (1 / Q), rel=1e-12)


@given(values, Qs)
def test_methods_agree(vals, Q):
    f = field_from(vals)
    a, b = lorentz_Q1_norm(f, Q, "rearrangement"), lorentz_Q1_norm(f, Q, "layercake")
    assert a == pytest.approx(b, rel=1e-9, abs=1e-300)


@given(values, Qs, st.integers(0, 1000))
def test_monotone(vals, Q, seed):
    f = field_from(vals)
    shrink = np.random.default_rng(seed).uniform(0, 1, size=len(vals))
    g = f.map(lambda v: v * shrink)
    for m in ("rearrangement", "layercake"):
        assert lorentz_Q1_norm(g, Q, m) <= lorentz_Q1_norm(f, Q, m)


@given(values, Qs, st.floats(0.0, 5.0))
def test_homogeneous(vals, Q, c):
    f = field_from(vals)
    assert lorentz_Q1_norm(f.map(lambda v: c * v), Q) == pytest.approx(c * lorentz_Q1_norm(f, Q), rel=1e-12,
                                                                      abs=1e-300)


@given(values, st.floats(0.0, 60.0))
def test_equimeasurable(vals, s):
    f = field_from(vals)
    assert rearrangement(f).distribution(s) == pytest.approx(distribution_function(f, s), rel=1e-12, abs=1e-12)


def test_rearrangement_values():
    f = SampledScalarField([2.0, -5.0, 1.0], [1.0, 0.5, 2.0])
    g = rearrangement(f)
    # 5 on [0, 0.5), 2 on [0.5, 1.5), 1 on [1.5, 3.5)
    np.testing.assert_allclose(g([0.1, 0.6, 1.4, 1.6, 3.0, 4.0]), [5, 2, 2, 1, 1, 0])


def test_lp_norm_frozen():
    f = SampledScalarField([1.0, -2.0], [0.5, 0.25])
    assert lp_norm(f, 2) == pytest.approx(np.sqrt(0.5 + 1.0))
    assert lp_norm(f, np.inf) == 2.0


def test_zero_field():
    f = SampledScalarField(np.zeros(4), 0.25)
    assert lorentz_Q1_norm(f, 3.0) == 0.0


def test_bad_inputs():
    with pytest.raises(DomainError):
        SampledScalarField([1.0], [0.0])
    with pytest.raises(DomainError):
        lorentz_Q1_norm(SampledScalarField([1.0], 1.0), 0.5)


def test_csv_roundtrip(tmp_path):
    f = SampledScalarField.uniform(np.arange(6.0).reshape(3, 2), [1.0, 2.0, 3.5], 3.0)
    f.to_csv(tmp_path / "f.csv")
    g = SampledScalarField.from_csv(tmp_path / "f.csv")
    np.testing.assert_array_equal(g.values, f.values)
    np.testing.assert_array_equal(g.weights, f.weights)
    np.testing.assert_array_equal(g.points, f.points)
