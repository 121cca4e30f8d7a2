"""Horizontal Jacobians and Monte-Carlo checks of the area formula for injective maps."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .calculus import DEFAULT_SCHEDULE, HLinearMap, MapSpec, pansu_jacobian_batch
from .errors import DomainError, UnsupportedError
from .groups import CarnotGroup
from .metric import Box, DinfBall, MeasureEstimate, mc_integral, mc_measure
from .rng import generator, map_shards, stable_sum


@dataclass
class HLinearCheck:
    max_hom_defect: float
    equivariance_ok: bool


def validate_hlinear(L: HLinearMap, samples: int = 1000, seed: int = 0) -> HLinearCheck:
    """Sampled homomorphism defect; dilation equivariance holds by the graded block structure.

    Constructing the HLinearMap already rejects off-layer blocks.
    """
    return HLinearCheck(L.homomorphism_defect(samples, seed), True)


def jacobian_JQ(L: HLinearMap, mode: str = "exact", n: int = 200_000, seed: int = 0) -> float | MeasureEstimate:
    """``|L(B_1)| / |B_1|`` for an endomorphism.

    ``exact`` returns ``|det|``; ``mc`` estimates the image measure through
    inverse membership and returns a MeasureEstimate of the ratio.
    """
    if not L.source.same_structure(L.target):
        raise UnsupportedError("J_Q is only computed for endomorphisms (equal Hausdorff normalisations)")
    g = L.source
    if mode == "exact":
        return abs(L.det())
    if mode != "mc":
        raise DomainError(f"unknown mode {mode!r}")
    if L.rank < g.n:
        return MeasureEstimate(0.0, 0.0, 0, {"rank_deficient": True})
    inv = np.linalg.inv(L.matrix)
    ball = DinfBall(g, g.identity(), 1.0)
    corners = Box(-g.ball_box(1.0), g.ball_box(1.0)).corners()
    img = L(corners)
    pad = 0.05 * (img.max(axis=0) - img.min(axis=0))
    box = Box(img.min(axis=0) - pad, img.max(axis=0) + pad)
    est = mc_measure(lambda y: ball.contains(y @ inv.T), box, n, seed)
    vol = ball.volume
    return MeasureEstimate(est.value / vol, est.stderr / vol, n, {"box_volume": box.volume})


def rank_deficient_image_measure(L: HLinearMap, E: Box, n: int = 200_000, seed: int = 0,
                                 thickness: float = 1e-9) -> MeasureEstimate:
    """Monte-Carlo measure of the thickened image ``L(E)`` of a box.

    A point counts when its distance to ``L(E)``, measured through the
    least-squares preimage, is below ``thickness``; the image of a
    rank-deficient map lies in a proper subspace and the estimate tends to 0.
    """
    pinv = np.linalg.pinv(L.matrix)
    img = L(E.corners())
    pad = 0.1 * (img.max(axis=0) - img.min(axis=0)) + 1e-3
    box = Box(img.min(axis=0) - pad, img.max(axis=0) + pad)

    def hit(y):
        x = y @ pinv.T
        return E.contains(x) & (np.linalg.norm(L(x) - y, axis=-1) <= thickness)

    return mc_measure(hit, box, n, seed)


# -- area formula ------------------------------------------------------------------------------


@dataclass
class Side:
    value: float
    stderr: float


@dataclass
class AreaReport:
    map: str
    region: dict
    lhs: Side
    rhs: Side
    relative_gap: float
    combined_stderr: float
    pansu_failures: int
    pansu_points: int
    padding: float
    valid: bool = True
    exact: float | None = None
    diagnostics: list = field(default_factory=list, repr=False)

    @property
    def within_3_stderr(self) -> bool:
        return abs(self.lhs.value - self.rhs.value) <= 3 * self.combined_stderr

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("diagnostics")
        return d

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    def diagnostics_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["point", "jacobian", "converged"])
            for pt, jac, ok in self.diagnostics:
                out.writerow([" ".join(repr(float(c)) for c in pt), repr(float(jac)), int(ok)])


def _region(E, g: CarnotGroup):
    if isinstance(E, (Box, DinfBall)):
        return E
    raise DomainError("E must be a Box or a DinfBall")


def image_bounding_box(f: MapSpec, E, probes: int = 1000, seed: int = 0, padding: float = 0.1) -> Box:
    """Box around images of sampled and boundary points of E, padded by a fraction of its size."""
    rng = generator(seed, 91)
    pts = [E.sample(rng, probes)]
    if isinstance(E, Box):
        pts.append(E.corners())
        faces = E.sample(rng, probes)
        axis = rng.integers(0, E.dim, size=probes)
        side = rng.integers(0, 2, size=probes)
        faces[np.arange(probes), axis] = np.where(side == 1, E.hi[axis], E.lo[axis])
        pts.append(faces)
    else:
        pts.append(E.boundary_probes(rng, probes))
    img = f(np.concatenate(pts))
    lo, hi = img.min(axis=0), img.max(axis=0)
    pad = padding * (hi - lo)
    return Box(lo - pad, hi + pad)


def area_formula_verify(f: MapSpec, E, n_lhs: int = 100_000, n_rhs: int = 1_000_000, seed: int = 0,
                        schedule=DEFAULT_SCHEDULE, probes: int = 1000, padding: float = 0.1,
                        weight: Callable | None = None, keep_diagnostics: int = 0,
                        workers: int = 1, exact: float | None = None) -> AreaReport:
    """``int_E u J_Q(d_P f) = int_{f(E)} u(f^-1 y)`` for an injective self-map with inverse.

    u defaults to 1.  The left side samples E; the right side samples a
    padded bounding box of f(E) and tests membership through the inverse.
    """
    if f.inverse is None:
        raise UnsupportedError("area verification needs a closed-form inverse")
    if not f.source.same_structure(f.target):
        raise UnsupportedError("source and target must coincide")
    g = f.source
    E = _region(E, g)
    u = weight or (lambda x: np.ones(len(x)))

    def lhs_shard(rng, size):
        x = E.sample(rng, size)
        jac, ok = pansu_jacobian_batch(f, x, schedule)
        v = u(x) * jac
        return float(v.sum()), float((v * v).sum()), int((~ok).sum())

    parts = map_shards(lhs_shard, n_lhs, seed, stream=3001, workers=workers)
    s1 = stable_sum(p[0] for p in parts)
    s2 = stable_sum(p[1] for p in parts)
    failures = sum(p[2] for p in parts)
    mean = s1 / n_lhs
    vol = E.volume
    lhs = Side(vol * mean, vol * math.sqrt(max(s2 / n_lhs - mean * mean, 0.0) / n_lhs))

    box = image_bounding_box(f, E, probes, seed, padding)

    def rhs_integrand(y):
        x = f.inverse(y)
        inside = E.contains(x)
        out = np.zeros(len(y))
        if np.any(inside):
            out[inside] = u(x[inside])
        return out

    r = mc_integral(rhs_integrand, box, n_rhs, seed, workers=workers, stream=3002)
    rhs = Side(r.value, r.stderr)
    comb = math.hypot(lhs.stderr, rhs.stderr)
    gap = abs(lhs.value - rhs.value) / max(abs(rhs.value), 1e-300)
    diag = []
    if keep_diagnostics:
        x = E.sample(generator(seed, 92), keep_diagnostics)
        jac, ok = pansu_jacobian_batch(f, x, schedule)
        diag = list(zip(x, jac, ok))
    pansu_points = 0 if (f.jacobian is not None or f.exact_pansu is not None) else n_lhs
    valid = pansu_points == 0 or failures <= 0.05 * pansu_points
    return AreaReport(f.name, E.to_dict(), lhs, rhs, gap, comb, failures, pansu_points, padding, valid, exact, diag)


def weighted_area_check(f: MapSpec, E, u: Callable, **opts) -> AreaReport:
    return area_formula_verify(f, E, weight=u, **opts)
