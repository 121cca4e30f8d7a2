import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from carnotkit.calculus import (
    Grid,
    HLinearMap,
    compose,
    difference_quotient,
    dilation_map,
    estimate_pansu_batch,
    estimate_pansu_differential,
    group_convolve,
    hlinear_lipschitz,
    hlinear_map,
    horizontal_gradient,
    identity_map,
    left_translation,
    mollifier,
    pansu_jacobian_batch,
    pansu_quotient,
    pointwise_lip,
    right_translation,
    scalar_map,
)
from carnotkit.errors import DomainError, StructureError
from carnotkit.experiments.config import shear_map
from carnotkit.groups import abelian, free_step2, heisenberg
from carnotkit.metric import Box
from carnotkit.rng import generator

blocks2 = arrays(np.float64, (2, 2), elements=st.floats(-3, 3, allow_nan=False))
blocks3 = arrays(np.float64, (3, 3), elements=st.floats(-3, 3, allow_nan=False))


def test_extension_frozen_h1():
    L = HLinearMap.from_horizontal([[2, 0], [0, 3]], heisenberg())
    np.testing.assert_allclose(L.matrix, np.diag([2, 3, 6]))
    R = HLinearMap.from_horizontal([[0, -1], [1, 0]], heisenberg())
    assert R.matrix[2, 2] == pytest.approx(1.0)


def test_graded_blocks_enforced():
    with pytest.raises(StructureError):
        HLinearMap(np.ones((3, 3)), heisenberg(), heisenberg())
    with pytest.raises(StructureError):
        HLinearMap.from_horizontal(np.eye(3), heisenberg())


def test_non_extendable_block():
    # H^1 -> R^2 x H^1 style mismatch: a rank-2 map from the abelian plane into H^1 is not a homomorphism
    with pytest.raises(StructureError):
        HLinearMap.from_horizontal(np.eye(2), abelian(2), heisenberg())


@given(blocks2)
def test_h1_extension_is_homomorphism(A):
    L = HLinearMap.from_horizontal(A, heisenberg())
    assert L.matrix[2, 2] == pytest.approx(np.linalg.det(A), abs=1e-9)
    assert L.homomorphism_defect(200, 0) <= 1e-9 * max(1.0, np.abs(A).max() ** 2)


@settings(max_examples=30)
@given(blocks3)
def test_free_step2_extension_is_homomorphism(A):
    g = free_step2(3)
    L = HLinearMap.from_horizontal(A, g)
    assert L.homomorphism_defect(200, 1) <= 1e-9 * max(1.0, np.abs(A).max() ** 2) * 10
    lam = 1.7
    x = generator(2).uniform(-1, 1, size=(10, g.n))
    np.testing.assert_allclose(L(g.dilate(lam, x)), g.dilate(lam, L(x)), atol=1e-10)


def test_hlinear_lipschitz_frozen():
    L = HLinearMap.from_horizontal([[2, 0], [0, 3]], heisenberg())
    # max(|A|, |det A|^(1/2)) = max(3, sqrt 6)
    assert hlinear_lipschitz(L) == pytest.approx(3.0)


def test_horizontal_gradient_of_vertical_coordinate(h1):
    # X1 = dx - y/2 dt, X2 = dy + x/2 dt
    x = np.array([0.4, -1.2, 0.3])
    grad = horizontal_gradient(h1, lambda p: p[..., 2], x)
    np.testing.assert_allclose(grad, [0.6, 0.2], atol=1e-9)


def test_difference_quotient_zero_step(h1):
    with pytest.raises(DomainError):
        difference_quotient(h1, lambda p: p[..., 0], [0, 0, 0], 0, 0.0)
    with pytest.raises(DomainError):
        difference_quotient(h1, lambda p: p[..., 0], [0, 0, 0], 2, 0.1)


@given(blocks2, arrays(np.float64, (3,), elements=st.floats(-2, 2)))
def test_pansu_recovers_hlinear(A, x):
    L = HLinearMap.from_horizontal(A, heisenberg())
    est = estimate_pansu_differential(hlinear_map(L), x)
    assert est.converged
    np.testing.assert_allclose(est.horizontal_matrix, A, atol=1e-8)


def test_pansu_shear_frozen(h1):
    f = shear_map(h1)
    x = np.array([0.7, -0.2, 0.1])
    est = estimate_pansu_differential(f, x)
    np.testing.assert_allclose(est.horizontal_matrix, [[1, 0], [1.4, 1]], atol=1e-6)
    jac, ok = pansu_jacobian_batch(f, generator(0).uniform(-1, 1, size=(50, 3)))
    assert ok.all()
    np.testing.assert_allclose(jac, 1.0, atol=1e-6)


def test_pansu_batch_matches_pointwise(h1):
    f = shear_map(h1)
    X = generator(3).uniform(-1, 1, size=(5, 3))
    rich, _, conv, _ = estimate_pansu_batch(f, X)
    for x, r in zip(X, rich):
        np.testing.assert_allclose(estimate_pansu_differential(f, x).horizontal_matrix, r, atol=1e-12)
    assert conv.all()


def test_pansu_scalar_gradient(h1):
    fn = lambda p: np.sin(p[..., 0]) * p[..., 1] + p[..., 2]  # noqa: E731
    x = np.array([0.3, 0.5, -0.4])
    est = estimate_pansu_differential(scalar_map(fn, h1), x)
    np.testing.assert_allclose(est.horizontal_matrix[0], horizontal_gradient(h1, fn, x), atol=1e-6)


def test_pansu_quotient_rejects_nonpositive_t(h1):
    with pytest.raises(DomainError):
        pansu_quotient(identity_map(h1), [0, 0, 0], [1, 0, 0], 0.0)


def test_translations_and_compose(h1):
    z = np.array([0.5, -1.0, 2.0])
    L, R = left_translation(h1, z), right_translation(h1, z)
    x = generator(4).uniform(-1, 1, size=(20, 3))
    np.testing.assert_allclose(L.inverse(L(x)), x, atol=1e-12)
    np.testing.assert_allclose(R.inverse(R(x)), x, atol=1e-12)
    c = compose(L, dilation_map(h1, 2.0))
    np.testing.assert_allclose(c(x), h1.multiply(z, h1.dilate(2.0, x)))
    np.testing.assert_allclose(c.inverse(c(x)), x, atol=1e-12)
    assert c.lipschitz_bound == pytest.approx(2.0)
    np.testing.assert_allclose(c.jacobian(x), 16.0)
    # right translations are not isometries of d_inf, so no Lipschitz bound is claimed
    assert compose(R, L).lipschitz_bound is None


@pytest.mark.parametrize("r", [1.0, 0.5, 3.0])
def test_pointwise_lip_dilation(h1, r):
    est = pointwise_lip(dilation_map(h1, r), [0.2, 0.1, -0.3], samples_per_radius=500)
    # rounding in the second layer is amplified by the square root at radius 1e-4
    assert est.value == pytest.approx(r, rel=1e-6)


def test_mollifier_reproduces_horizontal_affine(h1):
    m = mollifier(h1, 0.3, resolution=9)
    assert m.weights.sum() == pytest.approx(1.0)
    x = generator(5).uniform(-1, 1, size=(10, 3))
    np.testing.assert_allclose(m(lambda p: np.ones(len(p)), x), 1.0)
    np.testing.assert_allclose(m(lambda p: 2 * p[:, 0] - p[:, 1], x), 2 * x[:, 0] - x[:, 1], atol=1e-12)


def test_mollifier_is_local(h1):
    m = mollifier(h1, 0.1)
    # every node lies in the open unit ball, so only values within distance eps matter
    assert np.all(h1.norm(m.nodes) < 1)
    far = lambda p: (h1.norm(p) > 0.5).astype(float)  # noqa: E731
    assert m(far, np.zeros((1, 3)))[0] == 0.0


def test_group_convolve_spacing_rule(h1):
    grid = Grid(Box([-0.2] * 3, [0.2] * 3), 0.1)
    with pytest.raises(DomainError):
        group_convolve(h1, lambda p: p[:, 0], 0.15, grid)
    out = group_convolve(h1, lambda p: p[:, 0], 0.3, grid, resolution=5)
    assert out.shape == (5, 5, 5)
    np.testing.assert_allclose(out.values, out.nodes[:, 0], atol=1e-12)
