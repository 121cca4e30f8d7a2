import json
import math

import numpy as np
import pytest

from carnotkit.area import (
    area_formula_verify,
    image_bounding_box,
    jacobian_JQ,
    rank_deficient_image_measure,
    validate_hlinear,
    weighted_area_check,
)
from carnotkit.calculus import HLinearMap, compose, dilation_map, hlinear_map, identity_map, left_translation
from carnotkit.errors import UnsupportedError
from carnotkit.experiments.config import shear_map
from carnotkit.groups import abelian, free_step2, heisenberg
from carnotkit.metric import Box, DinfBall


def test_jacobian_exact_frozen(h1):
    L = HLinearMap.from_horizontal([[2, 0], [0, 3]], h1)
    assert jacobian_JQ(L) == pytest.approx(36.0)
    assert jacobian_JQ(HLinearMap.dilation(free_step2(3), 0.5)) == pytest.approx(0.5 ** 9)


def test_jacobian_mc_agrees(h1):
    L = HLinearMap.from_horizontal([[2, 0], [0, 3]], h1)
    est = jacobian_JQ(L, "mc", n=200_000, seed=1)
    assert abs(est.value - 36.0) <= 4 * est.stderr


def test_jacobian_requires_endomorphism(h1):
    L = HLinearMap.from_horizontal([[1, 0]], h1, abelian(1))
    with pytest.raises(UnsupportedError):
        jacobian_JQ(L)


def test_rank_deficient(h1):
    P = np.zeros((3, 3))
    P[0, 0] = 1.0
    L = HLinearMap(P, h1, h1)
    assert jacobian_JQ(L) == 0.0
    assert jacobian_JQ(L, "mc").value == 0.0
    E = Box([-1] * 3, [1] * 3)
    assert rank_deficient_image_measure(L, E, n=100_000).value <= 1e-3 * E.volume


def test_validate_hlinear(h1):
    chk = validate_hlinear(HLinearMap.from_horizontal([[1, 2], [3, 4]], h1), 500)
    assert chk.max_hom_defect < 1e-12 and chk.equivariance_ok


def test_image_box_contains_image(h1):
    f = compose(left_translation(h1, [1, 2, 3]), dilation_map(h1, 0.5))
    E = DinfBall(h1, [0, 0, 0], 1.0)
    box = image_bounding_box(f, E)
    pts = E.sample(np.random.default_rng(0), 5000)
    assert np.all(box.contains(f(pts)))


@pytest.mark.parametrize("f,J", [
    (identity_map(heisenberg()), 1.0),
    (dilation_map(heisenberg(), 0.7), 0.7 ** 4),
    (left_translation(heisenberg(), [0.3, -1, 2]), 1.0),
    (hlinear_map(HLinearMap.from_horizontal([[1, 1], [0, 2]], heisenberg())), 4.0),
    (shear_map(heisenberg()), 1.0),
])
def test_area_formula(f, J):
    E = DinfBall(heisenberg(), [0, 0, 0], 1.0)
    rep = area_formula_verify(f, E, 20_000, 200_000, seed=2)
    assert rep.valid and rep.pansu_failures == 0
    assert rep.lhs.value == pytest.approx(J * 2 * math.pi, rel=1e-6)
    assert abs(rep.lhs.value - rep.rhs.value) <= 4 * rep.combined_stderr


def test_weighted_area_oracle(h1):
    # int_{U_1} x^2 * 0.5^4 = 0.0625 * 2 * pi/4
    E = DinfBall(h1, [0, 0, 0], 1.0)
    rep = weighted_area_check(dilation_map(h1, 0.5), E, lambda x: x[:, 0] ** 2, n_lhs=100_000, n_rhs=400_000)
    exact = 0.0625 * math.pi / 2
    assert abs(rep.lhs.value - exact) <= 4 * rep.lhs.stderr
    assert abs(rep.rhs.value - exact) <= 4 * rep.rhs.stderr


def test_area_on_box_and_reports(h1, tmp_path):
    E = Box([0, 0, 0], [1, 2, 1])
    rep = area_formula_verify(shear_map(h1), E, 5000, 100_000, seed=0, keep_diagnostics=10)
    assert abs(rep.rhs.value - 2.0) <= 4 * rep.rhs.stderr
    rep.to_json(tmp_path / "area.json")
    assert json.loads((tmp_path / "area.json").read_text())["map"] == "shear"
    rep.diagnostics_csv(tmp_path / "diag.csv")
    assert len((tmp_path / "diag.csv").read_text().splitlines()) == 11


def test_area_needs_inverse(h1):
    f = identity_map(h1)
    f.inverse = None
    with pytest.raises(UnsupportedError):
        area_formula_verify(f, DinfBall(h1, [0, 0, 0], 1.0), 100, 100)


def test_area_deterministic_across_workers(h1):
    E = DinfBall(h1, [0, 0, 0], 1.0)
    a = area_formula_verify(shear_map(h1), E, 70_000, 140_000, seed=5, workers=1)
    b = area_formula_verify(shear_map(h1), E, 70_000, 140_000, seed=5, workers=3)
    assert a.to_dict() == b.to_dict()
