"""Stein-type continuity diagnostics: an Orlicz-Lorentz positive case and the log-log counterexample."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..calculus import MapSpec
from ..errors import DomainError
from ..metric import Box, DinfBall, mc_integral
from ..rng import generator
from .fields import SampledScalarField
from .lorentz import lorentz_Q1_norm, lp_norm
from .orlicz import NFunction, build_phi
from .variation import BallFamily, RRReport, ball_candidates, oscillation, rr_check, section_gradient_envelope


@dataclass
class SteinBall:
    osc_Q: float
    integral: float  # int_U F_phi(g)
    ratio: float


@dataclass
class SteinReport:
    phi_integral: float  # I1
    orlicz_integral: float  # I2 over the domain
    lorentz_norm: float
    balls: list[SteinBall]
    empirical_constant: float
    rr: RRReport
    phi_modified: bool
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.rr.passed


def stein_positive(f: MapSpec, domain: Box, A: NFunction, lambda_bar: float = 1.0, z_samples: int = 16,
                   field_samples: int = 4096, balls: int = 20, osc_samples: int = 32, n_integral: int = 2048,
                   h: float = 1e-5, seed: int = 0) -> SteinReport:
    """Fit the weight ``C I1^{Q-1} F_phi(g)`` on one ball set and test RR on a fresh one.

    g is the sampled envelope of section gradients and C the smallest
    constant that works on the calibration balls.
    """
    g1 = f.source
    Q = g1.hom_dim
    rng = generator(seed, 81)
    zs = f(domain.sample(rng, z_samples))

    def envelope(x):
        return section_gradient_envelope(f, zs, x, h)

    pts = domain.sample(generator(seed, 82), field_samples)
    gfield = SampledScalarField.uniform(pts, envelope(pts), domain.volume)
    lorentz = lorentz_Q1_norm(gfield, Q)
    phi = build_phi(A, lambda_bar, Q)
    I1 = phi.integral
    I2 = float(np.dot(gfield.weights, phi.F(gfield.values)))

    def density(x):
        return phi.F(envelope(x))

    cal = ball_candidates(f, domain, balls, osc_samples, seed + 1)
    recs = []
    orng = generator(seed, 83)
    for k, (c, r) in enumerate(zip(cal.centers, cal.radii)):
        oq = oscillation(f, c, r, osc_samples, orng) ** Q
        integral = mc_integral(density, DinfBall(g1, c, r), n_integral, seed, stream=100 + k).value
        base = I1 ** (Q - 1) * integral
        ratio = oq / base if base > 0 else (0.0 if oq == 0 else np.inf)
        recs.append(SteinBall(float(oq), float(integral), float(ratio)))
    C = max((b.ratio for b in recs), default=0.0)

    fresh = ball_candidates(f, domain, balls, osc_samples, seed + 2)
    fam = BallFamily(g1, fresh.centers, fresh.radii, fresh.oscillations)

    def weight(x):
        return C * I1 ** (Q - 1) * density(x)

    rr = rr_check(f, weight, fam, Q, osc_samples, n_integral, seed + 3)
    return SteinReport(I1, I2, float(lorentz), recs, float(C), rr, phi.modified,
                       {"lambda_bar": lambda_bar, "N_function": A.name, "z_samples": z_samples})


# -- log-log counterexample --------------------------------------------------------------------


def loglog(x) -> np.ndarray:
    """``log log (1 / |x|)`` on the punctured disc of radius < 1."""
    r = np.linalg.norm(np.asarray(x, dtype=float), axis=-1)
    return np.log(np.log(1.0 / r))


def loglog_gradient_norm(x) -> np.ndarray:
    r = np.linalg.norm(np.asarray(x, dtype=float), axis=-1)
    return 1.0 / (r * np.log(1.0 / r))


@dataclass
class SteinNegative:
    cells: list[int]
    spacing: list[float]
    lorentz: list[float]
    l2: list[float]
    growth_ratios: list[float]
    l2_gaps: list[float]
    min_ratio: float = 1.5
    max_gap: float = 0.05

    @property
    def increasing(self) -> bool:
        return all(b > a for a, b in zip(self.lorentz, self.lorentz[1:]))

    @property
    def growth_ok(self) -> bool:
        return self.increasing and all(r >= self.min_ratio for r in self.growth_ratios)

    @property
    def cauchy_ok(self) -> bool:
        return all(gap <= self.max_gap for gap in self.l2_gaps)

    @property
    def passed(self) -> bool:
        return self.growth_ok and self.cauchy_ok


def stein_negative(refinements: int = 4, base_cells: int = 64, radius: float = 0.5,
                   min_ratio: float = 1.5, max_gap: float = 0.05) -> SteinNegative:
    """L^{2,1} and L^2 norms of ``|grad log log(1/|x|)|`` on dyadically refined planar grids.

    Each level samples the disc of the given radius at cell centres of a
    uniform grid with ``base_cells * 2^k`` cells per side; cell centres
    never hit the singularity at 0.
    """
    if not 0 < radius < 1:
        raise DomainError("radius must lie in (0, 1)")
    cells, spacing, lor, l2 = [], [], [], []
    for k in range(refinements + 1):
        n = base_cells * 2 ** k
        h = 2 * radius / n
        c = -radius + h * (np.arange(n) + 0.5)
        X, Y = np.meshgrid(c, c, indexing="ij")
        pts = np.stack([X.ravel(), Y.ravel()], axis=1)
        pts = pts[np.linalg.norm(pts, axis=1) < radius]
        fld = SampledScalarField(loglog_gradient_norm(pts), h * h)
        cells.append(n)
        spacing.append(h)
        lor.append(lorentz_Q1_norm(fld, 2.0))
        l2.append(lp_norm(fld, 2.0))
    ratios = [b / a for a, b in zip(lor, lor[1:])]
    gaps = [abs(b - a) / b for a, b in zip(l2, l2[1:])]
    return SteinNegative(cells, spacing, lor, l2, ratios, gaps, min_ratio, max_gap)
