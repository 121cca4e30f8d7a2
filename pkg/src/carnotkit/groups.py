"""Exact arithmetic on step-2 Carnot groups in exponential coordinates.

A point is a float array whose last axis has length ``n``; leading axes are
batch axes, so every operation here is vectorised.  The built-in law is

    x * y = x + y + 1/2 [x, y],

where the bracket only reads first-layer coordinates and writes the second
layer.  For step <= 2 this truncated BCH series is exact.  Groups of higher
step can be used by passing an explicit ``law`` callable.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import CalibrationError, DomainError, StructureError
from .rng import generator

Point = np.ndarray
Law = Callable[[np.ndarray, np.ndarray], np.ndarray]

_ANTISYM_TOL = 1e-14


@dataclass(frozen=True)
class Stratification:
    layer_dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(m) for m in self.layer_dims)
        if not dims or any(m <= 0 for m in dims):
            raise StructureError(f"layer dimensions must be positive, got {self.layer_dims}")
        object.__setattr__(self, "layer_dims", dims)

    @property
    def step(self) -> int:
        return len(self.layer_dims)

    @property
    def topological_dim(self) -> int:
        return sum(self.layer_dims)

    @property
    def hom_dim(self) -> int:
        return sum(i * m for i, m in enumerate(self.layer_dims, start=1))

    @property
    def degrees(self) -> np.ndarray:
        """Degree d(i) of every coordinate."""
        return np.repeat(np.arange(1, self.step + 1), self.layer_dims)

    @property
    def slices(self) -> list[slice]:
        ends = np.cumsum(self.layer_dims)
        starts = ends - np.array(self.layer_dims)
        return [slice(int(a), int(b)) for a, b in zip(starts, ends)]


class CarnotGroup:
    """A stratified group on R^n with its dilations and d_inf norm.

    Parameters
    ----------
    layer_dims : sequence of int
        Dimensions ``(m_1, ..., m_s)`` of the layers.
    bracket : array_like, optional
        Table of shape ``(m_2, m_1, m_1)``; ``bracket[k, i, j]`` is the
        coefficient of the k-th second-layer basis vector in ``[X_i, X_j]``.
        Must be antisymmetric in ``(i, j)``.
    eps : sequence of float, optional
        Homogeneous-norm constants, one per layer, ``eps[0] == 1``.
    law : callable, optional
        Product for groups of step > 2.
    """

    def __init__(
        self,
        layer_dims: Sequence[int],
        bracket=None,
        eps: Sequence[float] | None = None,
        name: str | None = None,
        law: Law | None = None,
    ):
        self.strat = Stratification(tuple(layer_dims))
        s = self.strat.step
        m1 = self.strat.layer_dims[0]
        if s > 2 and law is None:
            raise StructureError("groups of step > 2 need an explicit law")
        if s == 2:
            m2 = self.strat.layer_dims[1]
            if bracket is None:
                raise StructureError("a step-2 group needs a bracket table")
            b = np.asarray(bracket, dtype=float)
            if b.shape != (m2, m1, m1):
                raise StructureError(f"bracket must have shape {(m2, m1, m1)}, got {b.shape}")
            if not np.allclose(b, -np.transpose(b, (0, 2, 1)), rtol=0, atol=_ANTISYM_TOL):
                raise StructureError("bracket table is not antisymmetric")
            if not np.any(b):
                raise StructureError("second layer is not generated: bracket table is zero")
        elif s == 1:
            if bracket is not None and np.size(bracket):
                raise StructureError("an abelian group has no bracket")
            b = np.zeros((0, m1, m1))
        else:
            b = None if bracket is None else np.asarray(bracket, dtype=float)
        self.bracket = b
        if b is not None:
            b.setflags(write=False)
        if eps is None:
            eps = (1.0,) * s
        eps = tuple(float(e) for e in eps)
        if len(eps) != s:
            raise StructureError(f"need {s} eps constants, got {len(eps)}")
        if eps[0] != 1.0 or any(not (0.0 < e <= 1.0) for e in eps):
            raise StructureError(f"eps must satisfy eps_1 = 1 and eps_i in (0, 1], got {eps}")
        self.eps = eps
        self.law = law
        self.name = name or _default_name(self.strat.layer_dims)

    # -- structure -------------------------------------------------------

    @property
    def n(self) -> int:
        return self.strat.topological_dim

    @property
    def m1(self) -> int:
        return self.strat.layer_dims[0]

    @property
    def step(self) -> int:
        return self.strat.step

    @property
    def hom_dim(self) -> int:
        return self.strat.hom_dim

    @property
    def is_abelian(self) -> bool:
        return self.step == 1

    def with_eps(self, eps: Sequence[float]) -> "CarnotGroup":
        return CarnotGroup(self.strat.layer_dims, self.bracket if self.step <= 2 else None,
                           eps, self.name, self.law)

    def same_structure(self, other: "CarnotGroup") -> bool:
        if self.strat != other.strat or self.law is not other.law:
            return False
        if self.bracket is None or other.bracket is None:
            return self.bracket is other.bracket
        return bool(np.array_equal(self.bracket, other.bracket))

    def __eq__(self, other):
        return isinstance(other, CarnotGroup) and self.same_structure(other) and self.eps == other.eps

    def __hash__(self):
        return hash((self.strat, self.eps, self.name))

    def __repr__(self):
        return f"CarnotGroup({self.name!r}, layer_dims={self.strat.layer_dims}, eps={self.eps})"

    # -- arithmetic ------------------------------------------------------

    def check(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if p.ndim == 0 or p.shape[-1] != self.n:
            raise StructureError(f"point of shape {p.shape} does not belong to {self.name} (n={self.n})")
        return p

    def bracket_map(self, a1: np.ndarray, b1: np.ndarray) -> np.ndarray:
        """Second-layer vector ``[a, b]`` for first-layer inputs."""
        return np.einsum("kij,...i,...j->...k", self.bracket, a1, b1)

    def multiply(self, a, b) -> np.ndarray:
        a, b = self.check(a), self.check(b)
        if self.law is not None:
            return np.asarray(self.law(a, b), dtype=float)
        out = a + b
        if self.step == 2:
            m1 = self.m1
            out[..., m1:] += 0.5 * self.bracket_map(a[..., :m1], b[..., :m1])
        return out

    def inverse(self, p) -> np.ndarray:
        return -self.check(p)

    def identity(self) -> np.ndarray:
        return np.zeros(self.n)

    def dilate(self, lam, p) -> np.ndarray:
        p = self.check(p)
        lam = np.asarray(lam, dtype=float)
        if np.any(lam < 0):
            raise DomainError("dilation factor must be non-negative")
        return p * lam[..., None] ** self.strat.degrees

    def layer(self, p, i: int) -> np.ndarray:
        """First layer is ``i == 1``."""
        return self.check(p)[..., self.strat.slices[i - 1]]

    def norm(self, p) -> np.ndarray:
        """Homogeneous norm ``max_i eps_i |p^i|^(1/i)``."""
        p = self.check(p)
        out = None
        for i, (sl, e) in enumerate(zip(self.strat.slices, self.eps), start=1):
            r = np.linalg.norm(p[..., sl], axis=-1)
            term = e * (r if i == 1 else r ** (1.0 / i))
            out = term if out is None else np.maximum(out, term)
        return out

    def distance(self, a, b) -> np.ndarray:
        """Left-invariant d_inf(a, b) = ||a^-1 b||."""
        return self.norm(self.multiply(self.inverse(a), b))

    def ball_volume(self, r: float = 1.0) -> float:
        """Exact Lebesgue measure of the open d_inf ball of radius r.

        The ball is a product of Euclidean balls, layer i having radius
        ``(r / eps_i)**i``.
        """
        vol = 1.0
        for i, (m, e) in enumerate(zip(self.strat.layer_dims, self.eps), start=1):
            rad = (r / e) ** i
            vol *= math.pi ** (m / 2) / math.gamma(m / 2 + 1) * rad**m
        return vol

    def ball_box(self, r: float = 1.0) -> np.ndarray:
        """Per-coordinate half widths of a box containing the centred d_inf ball."""
        return np.concatenate([np.full(m, (r / e) ** i)
                               for i, (m, e) in enumerate(zip(self.strat.layer_dims, self.eps), start=1)])

    # -- serialisation ---------------------------------------------------

    def to_dict(self) -> dict:
        entries = []
        if self.step == 2:
            m1 = self.m1
            for k, i, j in zip(*np.nonzero(self.bracket)):
                if i < j:
                    entries.append([int(i) + 1, int(j) + 1, int(k) + m1 + 1, float(self.bracket[k, i, j])])
        return {"name": self.name, "layer_dims": list(self.strat.layer_dims),
                "bracket": entries, "eps": list(self.eps)}


def _default_name(dims) -> str:
    return "G" + "x".join(str(m) for m in dims)


# -- construction -----------------------------------------------------------


def heisenberg(eps2: float = 1.0) -> CarnotGroup:
    b = np.zeros((1, 2, 2))
    b[0, 0, 1], b[0, 1, 0] = 1.0, -1.0
    return CarnotGroup((2, 1), b, (1.0, eps2), name="heisenberg1")


def abelian(n: int) -> CarnotGroup:
    return CarnotGroup((int(n),), None, name=f"abelian:{int(n)}")


def free_step2(m: int) -> CarnotGroup:
    """Free step-2 group on m generators; pairs i<j ordered lexicographically."""
    m = int(m)
    if m < 2:
        raise StructureError("free step-2 groups need at least two generators")
    pairs = list(itertools.combinations(range(m), 2))
    b = np.zeros((len(pairs), m, m))
    for k, (i, j) in enumerate(pairs):
        b[k, i, j], b[k, j, i] = 1.0, -1.0
    return CarnotGroup((m, len(pairs)), b, name=f"free-step2:{m}")


def builtin(name: str) -> CarnotGroup:
    """Resolve ``heisenberg1``, ``abelian:<n>`` or ``free-step2:<m>``."""
    key, _, arg = name.partition(":")
    if key == "heisenberg1" and not arg:
        return heisenberg()
    if key == "abelian" and arg:
        return abelian(int(arg))
    if key == "free-step2" and arg:
        return free_step2(int(arg))
    raise StructureError(f"unknown built-in group {name!r}")


def group_from_dict(doc: dict) -> CarnotGroup:
    """Build a group from ``{layer_dims, bracket: [[i, j, k, coeff], ...], eps}``.

    Indices are 1-based global coordinates: ``i, j`` first-layer, ``k``
    second-layer.  An entry ``(i, j)`` implies its antisymmetric partner;
    listing both with inconsistent coefficients is a structural error.
    """
    if "builtin" in doc:
        g = builtin(doc["builtin"])
        return g.with_eps(doc["eps"]) if "eps" in doc else g
    dims = tuple(int(m) for m in doc["layer_dims"])
    if len(dims) > 2:
        raise StructureError("JSON group definitions are limited to step <= 2")
    entries = doc.get("bracket", [])
    bracket = None
    if len(dims) == 2:
        m1, m2 = dims
        bracket = np.zeros((m2, m1, m1))
        seen = np.zeros_like(bracket, dtype=bool)
        for entry in entries:
            i, j, k, c = int(entry[0]) - 1, int(entry[1]) - 1, int(entry[2]) - 1 - m1, float(entry[3])
            if not (0 <= i < m1 and 0 <= j < m1 and 0 <= k < m2):
                raise StructureError(f"bracket entry {entry} out of range for layers {dims}")
            if i == j:
                if c != 0.0:
                    raise StructureError(f"bracket entry {entry}: [X_i, X_i] must vanish")
                continue
            for (a, bb, v) in ((i, j, c), (j, i, -c)):
                if seen[k, a, bb] and bracket[k, a, bb] != v:
                    raise StructureError(f"bracket entry {entry} breaks antisymmetry")
                bracket[k, a, bb] = v
                seen[k, a, bb] = True
    elif entries:
        raise StructureError("an abelian group has no bracket")
    return CarnotGroup(dims, bracket, doc.get("eps"), name=doc.get("name"))


def load_group(spec: str | dict | Path) -> CarnotGroup:
    """Group from a built-in name, a dict, or a path to a JSON document."""
    if isinstance(spec, dict):
        return group_from_dict(spec)
    spec = str(spec)
    if spec.endswith(".json") or Path(spec).is_file():
        return group_from_dict(json.loads(Path(spec).read_text()))
    return builtin(spec)


# -- functional surface --------------------------------------------------------


def multiply(g: CarnotGroup, a, b) -> Point:
    return g.multiply(a, b)


def inverse(g: CarnotGroup, p) -> Point:
    return g.inverse(p)


def dilate(g: CarnotGroup, lam, p) -> Point:
    return g.dilate(lam, p)


def hom_dim(g: CarnotGroup) -> int:
    return g.hom_dim


def dinf_norm(g: CarnotGroup, p) -> np.ndarray:
    return g.norm(p)


def dinf_distance(g: CarnotGroup, a, b) -> np.ndarray:
    return g.distance(a, b)


# -- eps calibration --------------------------------------------------------------


@dataclass
class EpsCalibration:
    eps: tuple[float, ...]
    worst_defect: float
    worst_relative_defect: float
    samples: int
    seed: int
    tried: list[tuple[float, float]] = field(default_factory=list)


def _multiscale_points(g: CarnotGroup, rng: np.random.Generator, size: int) -> np.ndarray:
    u = rng.uniform(-1.0, 1.0, size=(size, g.n))
    # random per-layer switches so that single-layer points are well represented
    mask = rng.random((size, g.step)) < 0.85
    mask[~mask.any(axis=1), 0] = True
    u *= np.repeat(mask, g.strat.layer_dims, axis=1)
    scale = 10.0 ** rng.uniform(-2, 2, size=size)
    return g.dilate(scale, u)


def triangle_defects(g: CarnotGroup, samples: int, seed: int) -> tuple[float, float]:
    """Worst ``d(a,c) - d(a,b) - d(b,c)`` over sampled triples (absolute, relative)."""
    rng = generator(seed, 17)
    a = _multiscale_points(g, rng, samples)
    b = g.multiply(a, _multiscale_points(g, rng, samples))
    c = g.multiply(b, _multiscale_points(g, rng, samples))
    dab, dbc, dac = g.distance(a, b), g.distance(b, c), g.distance(a, c)
    defect = dac - dab - dbc
    rel = defect / np.maximum(dab + dbc, np.finfo(float).tiny)
    return float(defect.max()), float(rel.max())


def calibrate_eps(g: CarnotGroup, samples: int = 100_000, rng_seed: int = 0,
                  grid_depth: int = 24, rel_tol: float = 1e-12) -> EpsCalibration:
    """Largest eps in {1, 1/2, 1/4, ...} (shared by layers >= 2) for which the
    sampled triangle inequality holds.

    ``rel_tol`` absorbs floating-point rounding only; the reported defects are
    the raw sampled values.
    """
    if samples < 1000:
        raise DomainError("calibration needs at least 1000 samples")
    if g.step == 1:
        d, r = triangle_defects(g, samples, rng_seed)
        return EpsCalibration((1.0,), d, r, samples, rng_seed, [(1.0, d)])
    tried = []
    for k in range(grid_depth + 1):
        e = 2.0**-k
        cand = g.with_eps((1.0,) + (e,) * (g.step - 1))
        d, r = triangle_defects(cand, samples, rng_seed)
        tried.append((e, d))
        if r <= rel_tol:
            return EpsCalibration(cand.eps, d, r, samples, rng_seed, tried)
    raise CalibrationError(f"no eps down to 2^-{grid_depth} satisfies the triangle inequality; "
                           f"defects by candidate: {tried[-3:]}")


# -- lattice and pavage ----------------------------------------------------------


def _check_box(g: CarnotGroup, box) -> np.ndarray:
    box = np.asarray(box, dtype=float)
    if box.shape != (g.n, 2):
        raise StructureError(f"box must have shape {(g.n, 2)}, got {box.shape}")
    if not np.all(np.isfinite(box)):
        raise DomainError("box must be bounded")
    if np.any(box[:, 0] > box[:, 1]):
        raise DomainError("box lower bounds exceed upper bounds")
    return box


def lattice_points(g: CarnotGroup, k: int, box, max_points: int = 5_000_000) -> np.ndarray:
    """All points of delta_{1/k}(Z^n) inside the closed coordinate box."""
    if int(k) < 1:
        raise DomainError("lattice refinement k must be >= 1")
    box = _check_box(g, box)
    scale = float(k) ** g.strat.degrees
    lo = np.ceil(box[:, 0] * scale - 1e-9) + 0.0
    hi = np.floor(box[:, 1] * scale + 1e-9)
    counts = np.maximum(hi - lo + 1, 0).astype(int)
    if np.prod(counts.astype(float)) > max_points:
        raise DomainError(f"box holds more than {max_points} lattice points")
    if np.any(counts == 0):
        return np.zeros((0, g.n))
    axes = [np.arange(a, b + 1) for a, b in zip(lo, hi)]
    xi = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, g.n)
    return g.dilate(1.0 / k, xi)


def pavage_owner(g: CarnotGroup, q) -> np.ndarray:
    """Integer xi with ``xi^-1 * q`` in the cube (-1/2, 1/2]^n."""
    if g.step > 2 or g.law is not None:
        raise StructureError("pavage owner is implemented for the built-in step <= 2 law")
    q = g.check(q)
    xi = np.empty_like(q)
    m1 = g.m1
    xi[..., :m1] = np.ceil(q[..., :m1] - 0.5)
    if g.step == 2:
        corr = q[..., m1:] - 0.5 * g.bracket_map(xi[..., :m1], q[..., :m1])
        xi[..., m1:] = np.ceil(corr - 0.5)
    return xi


def pavage_radius(g: CarnotGroup) -> float:
    """sup of d_inf over the unit cube, a proven covering radius of the pavage."""
    return max(e * (math.sqrt(m) / 2) ** (1.0 / i)
               for i, (m, e) in enumerate(zip(g.strat.layer_dims, g.eps), start=1))


def nearest_lattice_distance(g: CarnotGroup, k: int, p) -> np.ndarray:
    """Upper bound on the d_inf distance from p to Z_k (exact owner + neighbours)."""
    p = g.check(p)
    q = g.dilate(float(k), p)
    owner = pavage_owner(g, q)
    if 3**g.n <= 729:
        shifts = np.array(list(itertools.product((-1.0, 0.0, 1.0), repeat=g.n)))
    else:
        shifts = np.zeros((1, g.n))
    cand = owner[..., None, :] + shifts
    d = g.norm(g.multiply(g.inverse(cand), q[..., None, :])).min(axis=-1)
    return d / k


@dataclass
class CoverReport:
    k: int
    sigma1: float
    tested: int
    max_distance: float
    violations: np.ndarray

    @property
    def ok(self) -> bool:
        return len(self.violations) == 0


def verify_pavage_cover(g: CarnotGroup, k: int, sigma1: float, test_points: int = 10_000,
                        rng_seed: int = 0, region=None) -> CoverReport:
    """Check that every sampled point lies within sigma1/k of Z_k."""
    if sigma1 <= 0:
        raise DomainError("sigma1 must be positive")
    region = _check_box(g, region if region is not None else [[-2.0, 2.0]] * g.n)
    rng = generator(rng_seed, 23)
    pts = rng.uniform(region[:, 0], region[:, 1], size=(int(test_points), g.n))
    d = nearest_lattice_distance(g, k, pts)
    bad = pts[d > sigma1 / k]
    return CoverReport(int(k), float(sigma1), int(test_points), float(d.max(initial=0.0)), bad)


def sweep_sigma1(g: CarnotGroup, k: int, grid: Sequence[float], test_points: int = 10_000,
                 rng_seed: int = 0) -> float:
    """Smallest value on ``grid`` with no cover violations."""
    for s in sorted(grid):
        if verify_pavage_cover(g, k, s, test_points, rng_seed).ok:
            return float(s)
    raise CalibrationError(f"no sigma1 in {sorted(grid)} covers the sampled points")


def estimate_sigma0(g: CarnotGroup, R0: float = 1.0, samples: int = 2000, rng_seed: int = 0,
                    span: int = 1) -> float:
    """Sampled inf of d_inf(xi p, eta p) over integer xi != eta and ||p|| < R0.

    Only pairs from the window {-span..span}^n are enumerated, so this is an
    upper estimate of the true infimum; it makes no sharpness claim.
    """
    rng = generator(rng_seed, 29)
    p = _sample_centered_ball(g, rng, R0, samples)
    window = np.array(list(itertools.product(range(-span, span + 1), repeat=g.n)), dtype=float)
    xi, eta = window[:, None, :], window[None, :, :]
    x = g.multiply(g.inverse(np.broadcast_to(eta, (len(window),) * 2 + (g.n,))),
                   np.broadcast_to(xi, (len(window),) * 2 + (g.n,)))
    x = x[~np.eye(len(window), dtype=bool)]
    x = np.unique(x, axis=0)
    best = np.inf
    for chunk in np.array_split(p, max(1, len(p) // 200)):
        conj = g.multiply(g.multiply(g.inverse(chunk)[:, None, :], x[None]), chunk[:, None, :])
        best = min(best, float(g.norm(conj).min()))
    return best


def _sample_centered_ball(g: CarnotGroup, rng, r: float, size: int) -> np.ndarray:
    half = g.ball_box(r)
    out = []
    need = size
    while need > 0:
        pts = rng.uniform(-half, half, size=(max(2 * need, 64), g.n))
        pts = pts[g.norm(pts) < r]
        out.append(pts[:need])
        need -= len(out[-1])
    return np.concatenate(out)


@dataclass(frozen=True)
class LatticeCalibration:
    k: int
    sigma0: float
    sigma1: float

    def __post_init__(self):
        if self.k < 1 or self.sigma0 <= 0 or self.sigma1 <= 0:
            raise DomainError("lattice calibration needs k >= 1 and positive radii")
        if self.sigma0 > self.sigma1:
            raise DomainError("sigma0 must not exceed sigma1")


def calibrate_lattice(g: CarnotGroup, k: int, R0: float | None = None, samples: int = 2000,
                      rng_seed: int = 0) -> LatticeCalibration:
    sigma1 = pavage_radius(g)
    sigma0 = estimate_sigma0(g, R0 if R0 is not None else 2 * sigma1, samples, rng_seed)
    # raising sigma1 to sigma0 keeps the cover valid
    return LatticeCalibration(int(k), sigma0, max(sigma1, sigma0))
