"""Sections, oscillations and greedy ball-family diagnostics (Q-variation, Q-AC, RR)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..calculus import MapSpec, horizontal_gradient
from ..errors import DomainError, UnsupportedError
from ..groups import CarnotGroup
from ..metric import Box, DinfBall, _rejection_centered, mc_integral
from ..rng import generator

PROBE_SHRINK = 1e-9
ROUNDING = 1e-9


# -- sections -----------------------------------------------------------------------------


def section(f: MapSpec, z) -> Callable[[np.ndarray], np.ndarray]:
    """``x -> d2(z, f(x))`` with the target's d_inf distance."""
    z = f.target.check(z).astype(float)
    return lambda x: f.target.distance(z, f(x))


def section_gradient_envelope(f: MapSpec, z_samples, x, h: float = 1e-5) -> np.ndarray:
    """``max_z |grad_H u_z(x)|`` over the sampled z; a lower estimate of any upper gradient."""
    z_samples = np.atleast_2d(np.asarray(z_samples, dtype=float))
    if len(z_samples) == 0:
        raise DomainError("need at least one z sample")
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape[:-1])
    for z in z_samples:
        grad = horizontal_gradient(f.source, section(f, z), x, h)
        out = np.maximum(out, np.linalg.norm(grad, axis=-1))
    return out


# -- balls ----------------------------------------------------------------------------------


@dataclass
class BallFamily:
    g: CarnotGroup
    centers: np.ndarray
    radii: np.ndarray
    oscillations: np.ndarray
    metric: str = "dinf"

    def __len__(self) -> int:
        return len(self.radii)

    def volumes(self) -> np.ndarray:
        return self.g.ball_volume(1.0) * self.radii ** self.g.hom_dim

    def is_disjoint(self) -> bool:
        """``d(c_i, c_j) > r_i + r_j`` for all pairs."""
        if len(self) < 2:
            return True
        d = self.g.distance(self.centers[:, None, :], self.centers[None, :, :])
        s = self.radii[:, None] + self.radii[None, :]
        off = ~np.eye(len(self), dtype=bool)
        return bool(np.all(d[off] > s[off]))

    def to_dict(self) -> dict:
        return {"metric": self.metric, "centers": self.centers.tolist(), "radii": self.radii.tolist(),
                "oscillations": self.oscillations.tolist()}


def _image_halfwidths(g: CarnotGroup, c: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Half widths of a box around c containing ``c . B_r`` (d_inf ball)."""
    r = np.asarray(r, dtype=float)
    half = g.ball_box(1.0)[None, :] * r[:, None] ** g.strat.degrees[None, :]
    if g.step == 2:
        m1 = g.m1
        shear = 0.5 * np.abs(np.einsum("kij,ni->nkj", g.bracket, c[:, :m1]))
        half[:, m1:] += np.einsum("nkj,nj->nk", shear, half[:, :m1])
    elif g.step > 2:
        raise UnsupportedError("ball containment implemented for step <= 2")
    return half


def max_inscribed_radius(g: CarnotGroup, centers, domain: Box, iters: int = 60) -> np.ndarray:
    """Largest r (to bisection accuracy, from below) with ``c . B_r`` inside the box."""
    c = np.atleast_2d(np.asarray(centers, dtype=float))
    lo = np.zeros(len(c))
    hi = np.full(len(c), float(np.max(domain.hi - domain.lo)) + 1.0)
    inside = np.all((c >= domain.lo) & (c <= domain.hi), axis=1)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        hw = _image_halfwidths(g, c, mid)
        ok = np.all((c - hw >= domain.lo) & (c + hw <= domain.hi), axis=1) & inside
        lo = np.where(ok, mid, lo)
        hi = np.where(ok, hi, mid)
    return lo


def oscillation(f: MapSpec, center, r: float, samples: int, rng) -> float:
    """Sampled ``osc_U f``: largest target distance among images of points of U.

    Points are the centre, ``samples`` uniform points of the d_inf ball and
    the horizontal probes ``c . (+-r(1 - 1e-9) e_i)``.
    """
    g = f.source
    c = np.asarray(center, dtype=float)
    y = _rejection_centered(g, rng, r, samples) if samples > 0 else np.zeros((0, g.n))
    probes = np.concatenate([np.eye(g.n)[: g.m1], -np.eye(g.n)[: g.m1]]) * r * (1 - PROBE_SHRINK)
    pts = g.multiply(c, np.concatenate([np.zeros((1, g.n)), probes, y]))
    img = f(pts)
    d = f.target.distance(img[:, None, :], img[None, :, :])
    return float(d.max())


@dataclass
class Candidates:
    centers: np.ndarray
    radii: np.ndarray
    oscillations: np.ndarray


def ball_candidates(f: MapSpec, domain: Box, count: int, osc_samples: int, seed: int,
                    min_fraction: float = 0.02) -> Candidates:
    """Random balls inside the domain with sampled oscillations.

    A quarter of the radii are the largest admissible ones; the rest are a
    log-uniform fraction of it.
    """
    if count <= 0 or osc_samples < 0:
        raise DomainError("budget must be positive")
    g = f.source
    rng = generator(seed, 71)
    centers = domain.sample(rng, count)
    rmax = max_inscribed_radius(g, centers, domain)
    frac = np.exp(rng.uniform(np.log(min_fraction), 0.0, size=count))
    frac = np.where(rng.uniform(size=count) < 0.25, 1.0, frac)
    radii = rmax * frac * (1 - PROBE_SHRINK)
    keep = radii > 0
    centers, radii = centers[keep], radii[keep]
    orng = generator(seed, 72)
    osc = np.array([oscillation(f, c, r, osc_samples, orng) for c, r in zip(centers, radii)])
    return Candidates(centers, radii, osc)


def _greedy(g: CarnotGroup, cand: Candidates, order: np.ndarray, volumes: np.ndarray | None = None,
            budget: float = np.inf) -> list[int]:
    chosen: list[int] = []
    total = 0.0
    for i in order:
        if volumes is not None and not total + volumes[i] < budget:
            continue
        if chosen:
            d = g.distance(cand.centers[i], cand.centers[chosen])
            if not np.all(d > cand.radii[i] + cand.radii[chosen]):
                continue
        chosen.append(int(i))
        if volumes is not None:
            total += volumes[i]
    return chosen


@dataclass
class QVariation:
    estimate: float
    family: BallFamily
    candidates: int
    osc_samples: int


def q_variation_lower(f: MapSpec, domain: Box, Q: float, candidate_balls: int = 2000,
                      osc_samples: int = 32, seed: int = 0) -> QVariation:
    """Greedy disjoint family maximising ``sum osc^Q``: a sampled lower estimate of V_Q."""
    cand = ball_candidates(f, domain, candidate_balls, osc_samples, seed)
    score = cand.oscillations ** Q
    chosen = _greedy(f.source, cand, np.argsort(-score, kind="stable"))
    fam = BallFamily(f.source, cand.centers[chosen], cand.radii[chosen], cand.oscillations[chosen])
    return QVariation(float(np.sum(score[chosen])), fam, len(cand.radii), osc_samples)


@dataclass
class QACCurve:
    deltas: np.ndarray
    eps: np.ndarray
    raw: np.ndarray
    families: list[BallFamily] = field(default_factory=list)


def qac_modulus(f: MapSpec, domain: Box, Q: float, deltas: Sequence[float], candidate_balls: int = 2000,
                osc_samples: int = 32, seed: int = 0) -> QACCurve:
    """``eps(delta)``: best sampled ``sum osc^Q`` over disjoint families with total measure < delta."""
    deltas = np.asarray(deltas, dtype=float)
    if np.any(deltas <= 0) or np.any(np.diff(deltas) <= 0):
        raise DomainError("deltas must be positive and increasing")
    g = f.source
    cand = ball_candidates(f, domain, candidate_balls, osc_samples, seed)
    fam = BallFamily(g, cand.centers, cand.radii, cand.oscillations)
    vol = fam.volumes()
    score = cand.oscillations ** Q
    orders = [np.argsort(-score, kind="stable"), np.argsort(-(score / vol), kind="stable")]
    raw, fams = [], []
    for delta in deltas:
        best, best_fam = 0.0, []
        for order in orders:
            chosen = _greedy(g, cand, order, vol, delta)
            val = float(np.sum(score[chosen]))
            if val > best:
                best, best_fam = val, chosen
        raw.append(best)
        fams.append(BallFamily(g, cand.centers[best_fam], cand.radii[best_fam], cand.oscillations[best_fam]))
    raw = np.array(raw)
    return QACCurve(deltas, np.maximum.accumulate(raw), raw, fams)


# -- condition RR -----------------------------------------------------------------------------


@dataclass
class RRRecord:
    osc_Q: float
    integral: float
    stderr: float
    passed: bool


@dataclass
class RRReport:
    records: list[RRRecord]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    @property
    def failures(self) -> int:
        return sum(not r.passed for r in self.records)


def rr_check(f: MapSpec, w: Callable[[np.ndarray], np.ndarray], balls: BallFamily, Q: float | None = None,
             osc_samples: int = 32, n_integral: int = 4096, seed: int = 0) -> RRReport:
    """Per ball: ``osc^Q <= int_U w + 3 stderr``, with a relative 1e-9 allowance for rounding."""
    g = f.source
    Q = g.hom_dim if Q is None else Q
    rng = generator(seed, 73)
    out = []
    for k, (c, r) in enumerate(zip(balls.centers, balls.radii)):
        osc = oscillation(f, c, r, osc_samples, rng)

        def weight(x):
            val = np.asarray(w(x), dtype=float)
            if np.any(val < 0):
                raise DomainError("weights must be non-negative")
            return val

        est = mc_integral(weight, DinfBall(g, c, r), n_integral, seed, stream=k)
        oq = osc ** Q
        out.append(RRRecord(oq, est.value, est.stderr, bool(oq <= est.value * (1 + ROUNDING) + 3 * est.stderr)))
    return RRReport(out)
