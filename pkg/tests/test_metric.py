import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from carnotkit.errors import DomainError, SamplingError
from carnotkit.groups import abelian, free_step2, heisenberg
from carnotkit.metric import (
    Box,
    CCOptions,
    ControlPath,
    DinfBall,
    _rejection_centered,
    cc_distance,
    endpoint,
    equivalence_band,
    mc_integral,
    mc_measure,
    polygon_optimum,
    sample_ball,
)
from carnotkit.rng import generator


def h1_geodesic_distance(w):
    """Closed-form CC distance from 0 in H^1 (t = half the signed area swept).

    Geodesics are circle arcs: an arc of angle phi over a chord of length r
    sweeps area r^2 (phi - sin phi) / (8 sin^2(phi/2)) and has length
    r (phi/2) / sin(phi/2).
    """
    r, t = math.hypot(w[0], w[1]), abs(w[2])
    if t == 0:
        return r
    if r == 0:
        return 2 * math.sqrt(math.pi * t)

    def area(phi):
        return (phi - math.sin(phi)) / (8 * math.sin(phi / 2) ** 2) - t / r ** 2

    phi = brentq(area, 1e-12, 2 * math.pi - 1e-12, xtol=1e-15)
    return r * (phi / 2) / math.sin(phi / 2)


def test_oracle_self_check():
    assert h1_geodesic_distance([0, 0, 1]) == pytest.approx(2 * math.sqrt(math.pi))
    # a half circle of radius 1/2: chord 1, area pi/8
    assert h1_geodesic_distance([1, 0, math.pi / 8]) == pytest.approx(math.pi / 2, rel=1e-10)


def test_polygon_optimum_frozen():
    assert polygon_optimum(32, 1.0) == pytest.approx(3.55061961208, rel=1e-10)
    assert polygon_optimum(4, 1.0) == pytest.approx(4.0)


def test_vertical_distance_matches_polygon_oracle(h1):
    d = cc_distance(h1, [0, 0, 0], [0, 0, 1])
    assert d.converged
    assert d.value == pytest.approx(polygon_optimum(32, 1.0), rel=1e-6)


@pytest.mark.parametrize("w", [[1, 0, 0.2], [0.3, -0.4, -0.5], [0.1, 0.1, 1.0], [2.0, 1.0, 0.05], [0.5, 0.5, 0.3]])
def test_cc_matches_closed_form(h1, w):
    d = cc_distance(h1, h1.identity(), w, segments=32)
    assert d.converged
    exact = h1_geodesic_distance(w)
    # inscribed polygons overestimate the arc by O(1/N^2)
    assert exact * (1 - 1e-6) <= d.value <= exact * 1.005


def test_path_reaches_target(h1):
    w = np.array([0.3, -0.4, -0.5])
    d = cc_distance(h1, h1.identity(), w)
    np.testing.assert_allclose(endpoint(h1, h1.identity(), d.path), w, atol=1e-5)
    assert d.path.length == pytest.approx(d.value, rel=1e-6)
    assert d.lower_bound <= d.value


def test_square_loop_endpoint(h1):
    path = ControlPath([[1, 0], [0, 1], [-1, 0], [0, -1]], duration=4.0)
    np.testing.assert_allclose(endpoint(h1, [0, 0, 0], path), [0, 0, 1])
    assert path.length == pytest.approx(4.0)


@settings(max_examples=15)
@given(st.lists(st.floats(-1, 1), min_size=4, max_size=4))
def test_abelian_is_euclidean(c):
    g = abelian(2)
    p, q = np.array(c[:2]), np.array(c[2:])
    assert cc_distance(g, p, q).value == pytest.approx(np.linalg.norm(q - p), abs=1e-12)


@settings(max_examples=10)
@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1))
def test_horizontal_plane(a, b, t0):
    g = heisenberg()
    p = np.array([0.0, 0.0, t0])
    q = g.multiply(p, [a, b, 0.0])
    assert cc_distance(g, p, q).value == pytest.approx(math.hypot(a, b), abs=1e-12)


@settings(max_examples=6)
@given(st.integers(0, 10_000))
def test_cc_invariances(seed):
    g = heisenberg()
    rng = generator(seed, 5)
    p, q, z = rng.uniform(-1, 1, size=(3, 3))
    opts = CCOptions(segments=24, restarts=2)
    d = cc_distance(g, p, q, opts).value
    assert cc_distance(g, q, p, opts).value == pytest.approx(d, rel=1e-4)
    assert cc_distance(g, g.multiply(z, p), g.multiply(z, q), opts).value == pytest.approx(d, rel=1e-4)
    assert cc_distance(g, g.dilate(2.0, p), g.dilate(2.0, q), opts).value == pytest.approx(2 * d, rel=1e-4)


def test_free_step2_distance_dominates_projection():
    g = free_step2(3)
    w = np.array([0.2, -0.1, 0.3, 0.4, -0.2, 0.1])
    d = cc_distance(g, g.identity(), w, segments=24, restarts=2)
    assert d.converged and d.value >= d.lower_bound


def test_equivalence_band_h1(h1):
    rng = generator(0, 9)
    pairs = [tuple(rng.uniform(-1, 1, size=(2, 3))) for _ in range(6)]
    lo, hi = equivalence_band(h1, pairs, CCOptions(segments=16, restarts=1))
    assert 0 < lo <= hi < 10


def test_box_basics():
    b = Box([0, -1], [2, 1])
    assert b.volume == 4.0 and b.dim == 2
    assert b.contains([[1, 0], [3, 0]]).tolist() == [True, False]
    assert len(b.corners()) == 4
    with pytest.raises(DomainError):
        Box([1], [0])


def test_dinf_ball_sampling(group):
    ball = DinfBall(group, np.full(group.n, 0.3), 0.7)
    pts = ball.sample(generator(1), 500)
    assert np.all(ball.contains(pts))
    assert ball.volume == pytest.approx(group.ball_volume(0.7))


def test_sample_ball_cc_inside():
    g = heisenberg()
    pts = sample_ball(g, [0, 0, 0], 1.0, metric="cc", n=8, seed=0)
    for p in pts:
        assert cc_distance(g, g.identity(), p, segments=16).value < 1.0 + 1e-6


def test_rejection_rate_failure(h1):
    with pytest.raises(SamplingError):
        _rejection_centered(h1, generator(0), 1.0, 10, accept=lambda x: np.zeros(len(x), dtype=bool))


def test_mc_measure_unit_ball(h1):
    half = h1.ball_box(1.0)
    est = mc_measure(lambda p: h1.norm(p) < 1, Box(-half, half), 200_000, seed=3)
    assert abs(est.value - 2 * math.pi) <= 4 * est.stderr


def test_mc_worker_independence(h1):
    half = h1.ball_box(1.0)
    f = lambda p: h1.norm(p) < 1  # noqa: E731
    a = mc_measure(f, Box(-half, half), 300_000, seed=7, workers=1)
    b = mc_measure(f, Box(-half, half), 300_000, seed=7, workers=4)
    assert a.value == b.value and a.stderr == b.stderr
    c = mc_integral(lambda p: p[:, 0] ** 2, DinfBall(h1, [0, 0, 0], 1.0), 200_000, 1, workers=3)
    d = mc_integral(lambda p: p[:, 0] ** 2, DinfBall(h1, [0, 0, 0], 1.0), 200_000, 1, workers=1)
    assert c.value == d.value
    # int_{unit disc x [-1,1]} x^2 = 2 * pi/4
    assert abs(c.value - math.pi / 2) <= 4 * c.stderr
