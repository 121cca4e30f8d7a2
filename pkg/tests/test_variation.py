import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from carnotkit.calculus import dilation_map, identity_map, scalar_map
from carnotkit.errors import DomainError, UnsupportedError
from carnotkit.groups import abelian, heisenberg
from carnotkit.metric import Box, DinfBall
from carnotkit.rng import generator
from carnotkit.spaces import (
    BallFamily,
    SampledScalarField,
    ball_candidates,
    build_phi,
    max_inscribed_radius,
    oscillation,
    parse_nfunction,
    q_variation_lower,
    qac_modulus,
    riesz_constant_surrogate,
    riesz_inequality_check,
    riesz_potential,
    rr_check,
    section,
    section_gradient_envelope,
    stein_negative,
    stein_positive,
)

CUBE = Box([-1, -1, -1], [1, 1, 1])


def test_riesz_surrogate_frozen(h1):
    assert riesz_constant_surrogate(h1) == pytest.approx((1 + 8 * math.pi) ** 4)
    assert riesz_constant_surrogate(abelian(2)) == pytest.approx((1 + 2 * math.pi) ** 2)


def test_riesz_potential_of_ball(h1):
    # int_{U_R} ||x||^{1-Q} dx = Q |U_1| R
    # on the shell R/4 < ||x|| < R (the full ball has infinite variance)
    R = 0.8
    ball = DinfBall(h1, [0, 0, 0], R)
    pts = ball.sample(generator(0), 400_000)
    fld = SampledScalarField.uniform(pts, (h1.norm(pts) > R / 4).astype(float), ball.volume)
    assert riesz_potential(fld, h1, [0, 0, 0]) == pytest.approx(4 * 2 * math.pi * 0.75 * R, rel=0.01)


def test_riesz_inequality_holds_and_records_constant(h1):
    ball = DinfBall(h1, [0.1, 0, 0], 1.0)
    pts = ball.sample(generator(1), 5000)
    fld = SampledScalarField.uniform(pts, 1 + pts[:, 0] ** 2, ball.volume)
    res = riesz_inequality_check(fld, h1, [0, 0, 0.2], build_phi(parse_nfunction("power:6"), 1.0, 4))
    assert res.holds and res.empirical_constant < res.C_Q
    assert res.lhs == pytest.approx(res.empirical_constant * res.I1 ** 3 * res.I2)


def test_riesz_errors(h1):
    fld = SampledScalarField([1.0], 1.0, [[0.0, 0.0, 0.0]])
    with pytest.raises(DomainError):
        riesz_potential(fld, h1, [0, 0, 0])
    with pytest.raises(UnsupportedError):
        riesz_potential(fld, h1, [1, 0, 0], metric="cc")


@pytest.mark.parametrize("c,r", [([0, 0, 0], 1.0), ([0.5, 0, 0], 0.5), ([0, 0, 0.5], math.sqrt(0.5))])
def test_max_inscribed_radius_frozen(h1, c, r):
    assert max_inscribed_radius(h1, [c], CUBE)[0] == pytest.approx(r, rel=1e-12)


@settings(max_examples=30)
@given(st.integers(0, 10_000))
def test_inscribed_balls_are_contained(seed):
    g = heisenberg()
    rng = generator(seed)
    c = CUBE.sample(rng, 5)
    r = max_inscribed_radius(g, c, CUBE)
    for ci, ri in zip(c, r):
        if ri > 0:
            pts = DinfBall(g, ci, ri).sample(rng, 300)
            assert np.all(CUBE.contains(pts))


def test_oscillation_of_identity(h1):
    r = 0.3
    osc = oscillation(identity_map(h1), [0.1, 0.2, 0.3], r, 16, generator(0))
    assert osc == pytest.approx(2 * r * (1 - 1e-9), rel=1e-9)
    assert osc < 2 * r


def test_section(h1):
    f = identity_map(h1)
    z = np.array([0.2, 0.0, 0.1])
    x = generator(2).uniform(-1, 1, size=(5, 3))
    np.testing.assert_allclose(section(f, z)(x), h1.distance(z, x))
    env = section_gradient_envelope(f, [z, -z], x)
    # d_inf sections of the identity are 1-Lipschitz
    assert np.all(env <= 1 + 1e-4)


def test_disjointness_check(h1):
    fam = BallFamily(h1, np.array([[0, 0, 0], [1, 0, 0]], float), np.array([0.5, 0.5]), np.zeros(2))
    assert not fam.is_disjoint()
    fam.radii = np.array([0.49, 0.5])
    assert fam.is_disjoint()


@pytest.mark.parametrize("r", [0.5, 1.0, 2.0])
def test_qvar_lipschitz_bound_exact(h1, r):
    f = dilation_map(h1, r)
    qv = q_variation_lower(f, CUBE, 4, candidate_balls=300, osc_samples=8, seed=1)
    assert qv.family.is_disjoint()
    assert qv.estimate <= (2 * r) ** 4 * float(np.sum(qv.family.radii ** 4))


def test_qvar_abelian_unit_interval():
    qv = q_variation_lower(identity_map(abelian(1)), Box([0.0], [1.0]), 1.0, candidate_balls=2000, seed=0)
    assert 0.95 <= qv.estimate <= 1.0


def test_qac_monotone_and_bounded(h1):
    deltas = np.geomspace(1e-3, 4.0, 8)
    curve = qac_modulus(identity_map(h1), CUBE, 4, deltas, candidate_balls=300, osc_samples=8)
    assert np.all(np.diff(curve.eps) >= 0)
    assert np.all(curve.eps <= 16 * deltas / (2 * math.pi))
    for fam, d in zip(curve.families, deltas):
        assert fam.volumes().sum() < d and fam.is_disjoint()
    with pytest.raises(DomainError):
        qac_modulus(identity_map(h1), CUBE, 4, [1.0, 0.5])


def test_rr_check_detects_violations(h1):
    f = scalar_map(lambda p: p[..., 0], h1)
    cand = ball_candidates(f, CUBE, 5, 8, seed=0)
    fam = BallFamily(h1, cand.centers, cand.radii, cand.oscillations)
    assert not rr_check(f, lambda x: np.zeros(len(x)), fam, n_integral=256).passed
    assert rr_check(f, lambda x: np.full(len(x), 1e3), fam, n_integral=256).passed
    with pytest.raises(DomainError):
        rr_check(f, lambda x: -np.ones(len(x)), fam, n_integral=64)


def test_stein_positive_identity(h1):
    rep = stein_positive(identity_map(h1), CUBE, parse_nfunction("power:6"), 1.0, z_samples=16,
                         field_samples=512, balls=6, osc_samples=8, n_integral=512, seed=0)
    assert rep.passed and rep.empirical_constant > 0
    assert rep.lorentz_norm > 0 and rep.phi_modified


def test_stein_negative_l2_cauchy_and_increasing():
    neg = stein_negative(3, base_cells=32)
    assert neg.increasing and neg.cauchy_ok


def test_stein_negative_growth_follows_loglog_law():
    # |grad u| = 1/(r log(1/r)); cutting at the nearest cell centre r_h = h/sqrt(2) the
    # L^{2,1} norm grows like 2 sqrt(pi) (log L + 1/L) with L = log(1/r_h)
    neg = stein_negative(4)
    L = np.log(np.sqrt(2) / np.array(neg.spacing))
    pred = 2 * math.sqrt(math.pi) * np.diff(np.log(L) + 1 / L)
    np.testing.assert_allclose(np.diff(neg.lorentz), pred, rtol=0.05)
    # so the per-refinement ratio is far from a fixed factor such as 1.5
    assert max(neg.growth_ratios) < 1.1


def test_stein_negative_domain():
    with pytest.raises(DomainError):
        stein_negative(radius=1.5)
