"""Horizontal derivatives, Pansu differentials and group mollification."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, StructureError
from .groups import CarnotGroup, abelian
from .metric import Box
from .rng import generator


# -- homogeneous homomorphisms ----------------------------------------------------------


def _degrees(g: CarnotGroup) -> np.ndarray:
    return g.strat.degrees


@dataclass
class HLinearMap:
    """Homogeneous homomorphism written as a graded matrix in exponential coordinates."""

    matrix: np.ndarray
    source: CarnotGroup
    target: CarnotGroup

    def __post_init__(self):
        self.matrix = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        if self.matrix.shape != (self.target.n, self.source.n):
            raise StructureError(
                f"matrix shape {self.matrix.shape} does not match {self.target.n}x{self.source.n}")
        mixed = _degrees(self.target)[:, None] != _degrees(self.source)[None, :]
        if np.any(self.matrix[mixed] != 0):
            raise StructureError("nonzero block between layers of different degree")

    @classmethod
    def from_horizontal(cls, A, source: CarnotGroup, target: CarnotGroup | None = None,
                        atol: float = 1e-9) -> "HLinearMap":
        """Graded extension of a first-layer block.

        The second-layer block M solves ``sum_c M[:, c] b^c_ij = [A e_i, A e_j]``
        for all horizontal pairs; it is unique because the first layer
        generates.  A block with no homomorphic extension raises.
        """
        target = source if target is None else target
        A = np.atleast_2d(np.asarray(A, dtype=float))
        if A.shape != (target.m1, source.m1):
            raise StructureError(f"horizontal block must be {target.m1}x{source.m1}")
        mats, resid = graded_extension(A[None], source, target)
        if resid[0] > atol:
            raise StructureError("horizontal block does not extend to a homomorphism")
        return cls(mats[0], source, target)

    @classmethod
    def identity(cls, g: CarnotGroup) -> "HLinearMap":
        return cls(np.eye(g.n), g, g)

    @classmethod
    def dilation(cls, g: CarnotGroup, r: float) -> "HLinearMap":
        if r < 0:
            raise DomainError("dilation factor must be non-negative")
        return cls(np.diag(float(r) ** _degrees(g)), g, g)

    @property
    def horizontal_block(self) -> np.ndarray:
        return self.matrix[: self.target.m1, : self.source.m1]

    def __call__(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self.matrix.T

    def compose(self, inner: "HLinearMap") -> "HLinearMap":
        """``self o inner``."""
        if not inner.target.same_structure(self.source):
            raise StructureError("composition of incompatible maps")
        return HLinearMap(self.matrix @ inner.matrix, inner.source, self.target)

    @property
    def rank(self) -> int:
        return int(np.linalg.matrix_rank(self.matrix))

    def det(self) -> float:
        return float(np.linalg.det(self.matrix))

    def homomorphism_defect(self, samples: int = 1000, seed: int = 0, scale: float = 1.0) -> float:
        """max ||L(x y) - L(x) L(y)||_inf over sampled pairs (coordinate sup norm)."""
        rng = generator(seed, 61)
        x = rng.uniform(-scale, scale, size=(samples, self.source.n))
        y = rng.uniform(-scale, scale, size=(samples, self.source.n))
        lhs = self(self.source.multiply(x, y))
        rhs = self.target.multiply(self(x), self(y))
        return float(np.max(np.abs(lhs - rhs)))

    def to_dict(self) -> dict:
        return {"matrix": self.matrix.tolist(), "source": self.source.name, "target": self.target.name}


def graded_extension(A: np.ndarray, source: CarnotGroup, target: CarnotGroup) -> tuple[np.ndarray, np.ndarray]:
    """Graded matrices extending a batch of horizontal blocks ``A`` (B x m1' x m1).

    Returns the matrices and, per block, the residual of the bracket
    compatibility equations (0 when the extension is a homomorphism).
    """
    if source.step > 2 or target.step > 2:
        raise StructureError("graded extension supports step <= 2")
    A = np.asarray(A, dtype=float)
    B = len(A)
    mats = np.zeros((B, target.n, source.n))
    mats[:, : target.m1, : source.m1] = A
    pairs = list(itertools.combinations(range(source.m1), 2))
    if not pairs or target.step == 1:
        return mats, np.zeros(B)
    i, j = np.array(pairs).T
    rhs = target.bracket_map(A[:, :, i].transpose(0, 2, 1), A[:, :, j].transpose(0, 2, 1))  # (B, P, m2')
    if source.step == 1:
        return mats, np.abs(rhs).max(axis=(1, 2))
    bsrc = source.bracket[:, i, j].T  # (P, m2)
    M = np.einsum("cp,bpk->bck", np.linalg.pinv(bsrc), rhs)  # (B, m2, m2')
    resid = np.abs(np.einsum("pc,bck->bpk", bsrc, M) - rhs).max(axis=(1, 2))
    mats[:, target.m1:, source.m1:] = M.transpose(0, 2, 1)
    return mats, resid


# -- maps ------------------------------------------------------------------------------------


@dataclass
class MapSpec:
    """A map between Carnot groups, with optional closed-form extras.

    ``eval``, ``inverse`` and ``jacobian`` (|det| of the Pansu differential)
    act on arrays of points of shape ``(..., n)``.
    """

    source: CarnotGroup
    target: CarnotGroup
    eval: Callable[[np.ndarray], np.ndarray]
    inverse: Callable[[np.ndarray], np.ndarray] | None = None
    exact_pansu: Callable[[np.ndarray], HLinearMap] | None = None
    lipschitz_bound: float | None = None
    name: str = "map"
    domain: Box | None = None
    jacobian: Callable[[np.ndarray], np.ndarray] | None = None

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.domain is not None and not np.all(self.domain.contains(x)):
            raise DomainError(f"{self.name}: evaluation outside the domain box")
        return np.asarray(self.eval(x), dtype=float)

    def inverse_defect(self, samples: int = 1000, seed: int = 0, scale: float = 1.0) -> float:
        if self.inverse is None:
            raise DomainError(f"{self.name} has no inverse")
        rng = generator(seed, 62)
        y = rng.uniform(-scale, scale, size=(samples, self.target.n))
        return float(np.max(np.abs(self.eval(self.inverse(y)) - y)))


def scalar_map(f: Callable[[np.ndarray], np.ndarray], g: CarnotGroup, name: str = "scalar",
               **kwargs) -> MapSpec:
    """Wrap a real-valued field as a map into the line."""
    return MapSpec(g, abelian(1), lambda x: np.asarray(f(x), dtype=float)[..., None], name=name, **kwargs)


def hlinear_lipschitz(L: HLinearMap) -> float:
    """Lipschitz constant bound for d_inf: ``max_i (eps'_i / eps_i) |block_i|^{1/i}``."""
    out = 0.0
    for i, (ss, ts) in enumerate(zip(L.source.strat.slices, L.target.strat.slices), start=1):
        block = np.linalg.norm(L.matrix[ts, ss], 2)
        out = max(out, L.target.eps[i - 1] / L.source.eps[i - 1] * block ** (1.0 / i))
    return float(out)


def hlinear_map(L: HLinearMap, name: str = "hlinear") -> MapSpec:
    inverse = jacobian = None
    if L.source.same_structure(L.target):
        det = abs(L.det())
        jacobian = lambda x: np.full(np.shape(x)[:-1], det)  # noqa: E731
        if L.rank == L.source.n:
            inv = np.linalg.inv(L.matrix)
            inverse = lambda y: np.asarray(y, dtype=float) @ inv.T  # noqa: E731
    return MapSpec(L.source, L.target, L, inverse=inverse, exact_pansu=lambda x: L,
                   lipschitz_bound=hlinear_lipschitz(L), name=name, jacobian=jacobian)


def identity_map(g: CarnotGroup) -> MapSpec:
    return hlinear_map(HLinearMap.identity(g), name="identity")


def dilation_map(g: CarnotGroup, r: float) -> MapSpec:
    return hlinear_map(HLinearMap.dilation(g, r), name=f"dilation:{r:g}")


def left_translation(g: CarnotGroup, z) -> MapSpec:
    z = g.check(z).astype(float)
    return MapSpec(g, g, lambda x: g.multiply(z, x), inverse=lambda y: g.multiply(g.inverse(z), y),
                   exact_pansu=lambda x: HLinearMap.identity(g), lipschitz_bound=1.0, name="translation",
                   jacobian=lambda x: np.ones(np.shape(x)[:-1]))


def right_translation(g: CarnotGroup, z) -> MapSpec:
    z = g.check(z).astype(float)
    return MapSpec(g, g, lambda x: g.multiply(x, z), inverse=lambda y: g.multiply(y, g.inverse(z)),
                   name="right-translation")


def compose(outer: MapSpec, inner: MapSpec, name: str | None = None) -> MapSpec:
    """``outer o inner``; extras survive when both factors provide them."""
    inverse = exact = lip = jac = None
    if outer.inverse is not None and inner.inverse is not None:
        inverse = lambda y: inner.inverse(outer.inverse(y))  # noqa: E731
    if outer.exact_pansu is not None and inner.exact_pansu is not None:
        exact = lambda x: outer.exact_pansu(inner.eval(x)).compose(inner.exact_pansu(x))  # noqa: E731
    if outer.lipschitz_bound is not None and inner.lipschitz_bound is not None:
        lip = outer.lipschitz_bound * inner.lipschitz_bound
    if outer.jacobian is not None and inner.jacobian is not None:
        jac = lambda x: outer.jacobian(inner.eval(x)) * inner.jacobian(x)  # noqa: E731
    return MapSpec(inner.source, outer.target, lambda x: outer.eval(inner.eval(x)), inverse=inverse,
                   exact_pansu=exact, lipschitz_bound=lip, jacobian=jac, name=name or f"{outer.name}o{inner.name}")


# -- horizontal derivatives ---------------------------------------------------------------------


def _horizontal_step(g: CarnotGroup, i: int, h: float) -> np.ndarray:
    if not 0 <= i < g.m1:
        raise DomainError(f"horizontal index {i} outside 0..{g.m1 - 1}")
    e = np.zeros(g.n)
    e[i] = h
    return e


def difference_quotient(g: CarnotGroup, f: Callable, x, i: int, h: float) -> np.ndarray:
    """``(f(x . h e_i) - f(x)) / h`` for horizontal index ``i`` (0-based)."""
    if h == 0:
        raise DomainError("difference step must be nonzero")
    x = np.asarray(x, dtype=float)
    y = g.multiply(x, _horizontal_step(g, i, h))
    return (np.asarray(f(y), dtype=float) - np.asarray(f(x), dtype=float)) / h


def horizontal_gradient(g: CarnotGroup, f: Callable, x, h: float = 1e-5) -> np.ndarray:
    """Central-difference horizontal gradient ``(X_1 f, ..., X_m1 f)``, shape ``(..., m1)``."""
    if h <= 0:
        raise DomainError("difference step must be positive")
    x = np.asarray(x, dtype=float)
    cols = [
        0.5 * (difference_quotient(g, f, x, i, h) + difference_quotient(g, f, x, i, -h))
        for i in range(g.m1)
    ]
    return np.stack(cols, axis=-1)


def grid_lp_norm(values, cell_volume: float, p: float) -> float:
    v = np.abs(np.asarray(values, dtype=float))
    if np.isinf(p):
        return float(v.max(initial=0.0))
    return float((np.sum(v ** p) * cell_volume) ** (1.0 / p))


# -- Pansu differential ----------------------------------------------------------------------------


def pansu_quotient(f: MapSpec, x, v, t) -> np.ndarray:
    """``delta_{1/t}( f(x)^-1 f(x . delta_t v) )``; broadcasts over v and t."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise DomainError("t must be positive")
    g1, g2 = f.source, f.target
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    moved = g1.multiply(x, g1.dilate(t, v))
    diff = g2.multiply(g2.inverse(f(x)), f(moved))
    return g2.dilate(1.0 / t, diff)


@dataclass
class PansuEstimate:
    horizontal_matrix: np.ndarray
    t_schedule: np.ndarray
    residuals: np.ndarray
    converged: bool
    raw_matrix: np.ndarray = field(default=None)

    def to_hlinear(self, source: CarnotGroup, target: CarnotGroup, atol: float = 1e-6) -> HLinearMap:
        return HLinearMap.from_horizontal(self.horizontal_matrix, source, target, atol=atol)


DEFAULT_SCHEDULE = tuple(2.0 ** -k for k in range(4, 13))


def estimate_pansu_differential(f: MapSpec, x, schedule: Sequence[float] = DEFAULT_SCHEDULE,
                                tol: float = 1e-4) -> PansuEstimate:
    """Horizontal block of the Pansu differential of f at x.

    First-layer quotients along each horizontal direction are collected
    over the schedule and Richardson-extrapolated assuming an O(t) error;
    residuals are the relative changes of the extrapolated sequence.  The
    estimate is converged when the last two residuals are below ``tol``.
    """
    rich, res, conv, raw = estimate_pansu_batch(f, np.asarray(x, dtype=float)[None], schedule, tol)
    return PansuEstimate(rich[0], np.asarray(schedule, dtype=float), res[0], bool(conv[0]), raw[0])


def estimate_pansu_batch(f: MapSpec, X, schedule: Sequence[float] = DEFAULT_SCHEDULE, tol: float = 1e-4):
    """Vectorised estimator over points ``X`` (B x n).

    Returns extrapolated blocks (B x m1' x m1), residuals, convergence flags
    and the raw blocks at the smallest t.
    """
    t = np.asarray(schedule, dtype=float)
    if t.ndim != 1 or len(t) < 3 or np.any(t <= 0) or np.any(np.diff(t) >= 0):
        raise DomainError("schedule must be a strictly decreasing positive list of >= 3 values")
    g1, g2 = f.source, f.target
    X = np.atleast_2d(np.asarray(X, dtype=float))
    basis = np.eye(g1.n)[: g1.m1]
    # q[k, b, i, :] is the quotient at t_k, point b, direction e_i
    q = pansu_quotient(f, X[None, :, None, :], basis[None, None], t[:, None, None])
    raw = np.swapaxes(q[..., : g2.m1], -1, -2)  # (k, B, m1', m1)
    ratio = (t[:-1] / t[1:])[:, None, None, None]
    rich = (ratio * raw[1:] - raw[:-1]) / (ratio - 1)
    with np.errstate(invalid="ignore", over="ignore"):
        scale = np.maximum(np.abs(rich[1:]).max(axis=(2, 3)), 1.0)
        residuals = (np.abs(rich[1:] - rich[:-1]).max(axis=(2, 3)) / scale).T  # (B, k-2)
    converged = np.all(np.isfinite(residuals), axis=1) & np.all(residuals[:, -2:] <= tol, axis=1)
    return rich[-1], residuals, converged, raw[-1]


def pansu_jacobian_batch(f: MapSpec, X, schedule: Sequence[float] = DEFAULT_SCHEDULE,
                         atol: float = 1e-6) -> tuple[np.ndarray, np.ndarray]:
    """``|det|`` of the graded differential at each point, and a per-point success flag.

    Uses ``f.jacobian`` when provided, otherwise estimation plus graded extension.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if f.jacobian is not None:
        return np.asarray(f.jacobian(X), dtype=float), np.ones(len(X), dtype=bool)
    if f.exact_pansu is not None:
        return np.array([abs(f.exact_pansu(x).det()) for x in X]), np.ones(len(X), dtype=bool)
    blocks, _, conv, _ = estimate_pansu_batch(f, X, schedule)
    mats, resid = graded_extension(blocks, f.source, f.target)
    return np.abs(np.linalg.det(mats)), conv & (resid <= atol)


def pansu_matrix(f: MapSpec, x, schedule: Sequence[float] = DEFAULT_SCHEDULE) -> tuple[HLinearMap | None, bool]:
    """Full graded differential at x: exact when available, else estimated and extended."""
    if f.exact_pansu is not None:
        return f.exact_pansu(np.asarray(x, dtype=float)), True
    est = estimate_pansu_differential(f, x, schedule)
    try:
        return est.to_hlinear(f.source, f.target), est.converged
    except StructureError:
        return None, False


# -- pointwise Lipschitz constant -----------------------------------------------------------------


@dataclass
class LipEstimate:
    value: float
    radii: np.ndarray
    per_radius: np.ndarray


def pointwise_lip(f: MapSpec, x, radii: Sequence[float] = (1e-2, 1e-3, 1e-4),
                  samples_per_radius: int = 2000, seed: int = 0) -> LipEstimate:
    """Sampled lower estimate of ``limsup d2(f(q), f(x)) / d1(q, x)``.

    Each radius uses random points of the d_inf ball plus the horizontal
    probes ``x . (+-r e_i)``; the value reported is the maximum at the
    smallest radius.
    """
    r = np.asarray(radii, dtype=float)
    if np.any(r <= 0) or np.any(np.diff(r) >= 0):
        raise DomainError("radii must be positive and strictly decreasing")
    g1, g2 = f.source, f.target
    x = g1.check(x).astype(float)
    fx = f(x)
    rng = generator(seed, 63)
    probes = np.concatenate([np.eye(g1.n)[: g1.m1], -np.eye(g1.n)[: g1.m1]])
    per = []
    for rad in r:
        half = g1.ball_box(rad)
        y = rng.uniform(-half, half, size=(samples_per_radius, g1.n))
        y = y[(g1.norm(y) < rad) & (g1.norm(y) > 0)]
        y = np.concatenate([y, probes * rad * (1 - 1e-9)])
        q = g1.multiply(x, y)
        ratios = g2.distance(fx, f(q)) / g1.norm(y)
        per.append(float(np.max(ratios)))
    per = np.array(per)
    return LipEstimate(float(per[-1]), r, per)


# -- mollification -----------------------------------------------------------------------------------


def bump(g: CarnotGroup, u) -> np.ndarray:
    """Even product bump, positive exactly on ``{|eps_i^i u_i| < 1 for every layer}``.

    That set is the open unit d_inf ball.
    """
    u = np.asarray(u, dtype=float)
    out = np.ones(u.shape[:-1])
    for i, sl in enumerate(g.strat.slices):
        s = (g.eps[i] ** (i + 1)) ** 2 * np.sum(u[..., sl] ** 2, axis=-1)
        with np.errstate(divide="ignore", over="ignore"):
            out = out * np.where(s < 1, np.exp(-1.0 / np.maximum(1 - s, 1e-300)), 0.0)
    return out


@dataclass
class Mollifier:
    """Quadrature rule for ``(rho_eps * f)(x) = int rho(u) f(delta_eps(u)^-1 x) du``."""

    g: CarnotGroup
    epsilon: float
    nodes: np.ndarray
    weights: np.ndarray

    def __call__(self, f: Callable, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        z = self.g.inverse(self.g.dilate(self.epsilon, self.nodes))
        pts = self.g.multiply(z[:, None, :], np.reshape(x, (1, -1, self.g.n)))
        vals = np.asarray(f(pts.reshape(-1, self.g.n)), dtype=float).reshape(len(self.nodes), -1)
        return np.tensordot(self.weights, vals, axes=1).reshape(x.shape[:-1])


def mollifier(g: CarnotGroup, epsilon: float, resolution: int = 9,
              kernel: Callable | None = None) -> Mollifier:
    """Midpoint rule on the unit d_inf box ball, weights normalised to sum 1."""
    if epsilon <= 0:
        raise DomainError("epsilon must be positive")
    kernel = kernel or (lambda u: bump(g, u))
    half = g.ball_box(1.0)
    axes = [(np.arange(resolution) + 0.5) / resolution * 2 * hw - hw for hw in half]
    nodes = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, g.n)
    w = np.asarray(kernel(nodes), dtype=float)
    if np.any(w < 0) or w.sum() <= 0:
        raise DomainError("kernel must be non-negative and not identically zero on the grid")
    keep = w > 0
    return Mollifier(g, float(epsilon), nodes[keep], w[keep] / w[keep].sum())


@dataclass
class Grid:
    box: Box
    spacing: float

    def nodes(self) -> tuple[np.ndarray, tuple[int, ...]]:
        axes = [np.arange(lo, hi + 0.5 * self.spacing, self.spacing) for lo, hi in zip(self.box.lo, self.box.hi)]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        return mesh.reshape(-1, len(axes)), mesh.shape[:-1]


@dataclass
class GriddedField:
    nodes: np.ndarray
    values: np.ndarray
    shape: tuple[int, ...]


def group_convolve(g: CarnotGroup, f: Callable, epsilon: float, grid: Grid, resolution: int = 9,
                   kernel: Callable | None = None) -> GriddedField:
    """Mollified field ``f * rho_eps`` evaluated at the grid nodes."""
    if epsilon < 2 * grid.spacing:
        raise DomainError("epsilon must be at least twice the grid spacing")
    moll = mollifier(g, epsilon, resolution, kernel)
    nodes, shape = grid.nodes()
    return GriddedField(nodes, moll(f, nodes), shape)
