"""Carnot-Caratheodory distance, ball sampling and Monte-Carlo measure."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from .errors import DomainError, SamplingError, StructureError
from .groups import CarnotGroup
from .rng import generator, map_shards, stable_sum


# -- horizontal paths ------------------------------------------------------------


@dataclass
class ControlPath:
    """Piecewise-constant horizontal controls on equal-length time segments."""

    controls: np.ndarray
    duration: float = 1.0

    def __post_init__(self):
        self.controls = np.atleast_2d(np.asarray(self.controls, dtype=float))
        if self.duration <= 0:
            raise DomainError("path duration must be positive")

    @property
    def segments(self) -> int:
        return len(self.controls)

    @property
    def tau(self) -> float:
        return self.duration / self.segments

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.controls, axis=1).sum() * self.tau)


def endpoint(g: CarnotGroup, start, path: ControlPath) -> np.ndarray:
    """Exact endpoint: each constant-control segment right-multiplies by ``(tau*u, 0)``."""
    x = g.check(start).astype(float)
    if path.controls.shape[1] != g.m1:
        raise StructureError(f"controls must have {g.m1} components")
    step = np.zeros(g.n)
    for u in path.controls:
        step[: g.m1] = path.tau * u
        x = g.multiply(x, step)
    return x


def _endpoint_from_origin(g: CarnotGroup, v: np.ndarray) -> np.ndarray:
    """Endpoint from 0 of displacements v (N x m1), vectorised."""
    s = v.sum(axis=0)
    if g.step == 1:
        return s
    prefix = np.cumsum(v, axis=0) - v
    z = 0.5 * np.einsum("kij,ni,nj->k", g.bracket, prefix, v)
    return np.concatenate([s, z])


def _endpoint_jacobian(g: CarnotGroup, v: np.ndarray) -> np.ndarray:
    """d endpoint / d v, shape (n, N*m1)."""
    N, m1 = v.shape
    jac = np.zeros((g.n, N, m1))
    jac[:m1] = np.eye(m1)[:, None, :]
    if g.step == 2:
        prefix = np.cumsum(v, axis=0) - v
        suffix = v.sum(axis=0) - np.cumsum(v, axis=0)
        jac[m1:] = 0.5 * np.einsum("kij,nj->kni", g.bracket, suffix - prefix)
    return jac.reshape(g.n, N * m1)


# -- distance ----------------------------------------------------------------------


@dataclass
class DistanceEstimate:
    value: float
    lower_bound: float
    path: ControlPath
    converged: bool
    residual: float = 0.0


@dataclass
class CCOptions:
    segments: int = 32
    iterations: int = 300
    restarts: int = 4
    seed: int = 0
    mu: tuple[float, ...] = (10.0, 100.0, 1000.0)
    tol: float = 1e-6


def _smoothed_length(v, eta):
    r = np.sqrt((v * v).sum(axis=1) + eta * eta)
    return r.sum(), v / r[:, None]


def _solve_unit(g: CarnotGroup, target: np.ndarray, opts: CCOptions) -> tuple[np.ndarray, float, float]:
    """Shortest polygonal path from 0 to a target with ||target||_inf == 1."""
    N, m1 = opts.segments, g.m1
    eta = 1e-6 / N
    rng = generator(opts.seed, 41)

    def residual(x):
        return _endpoint_from_origin(g, x.reshape(N, m1)) - target

    def penalty(x, mu):
        v = x.reshape(N, m1)
        length, dlen = _smoothed_length(v, eta)
        r = residual(x)
        grad = dlen.ravel() + 2 * mu * (_endpoint_jacobian(g, v).T @ r)
        return length + mu * (r @ r), grad

    def length(x):
        val, d = _smoothed_length(x.reshape(N, m1), eta)
        return val, d.ravel()

    starts = []
    if np.any(target[:m1]):
        starts.append(np.tile(target[:m1] / N, N))
    for _ in range(max(opts.restarts - len(starts), 1)):
        starts.append(rng.normal(scale=2.0 / N, size=N * m1))

    # penalty continuation from every start, constrained polish of the best one
    cands = []
    for x0 in starts:
        x = x0
        for mu in opts.mu:
            res = optimize.minimize(penalty, x, args=(mu,), jac=True, method="L-BFGS-B",
                                    options={"maxiter": opts.iterations})
            x = res.x
        cands.append((penalty(x, opts.mu[-1])[0], x))
    cands.sort(key=lambda c: c[0])

    best = None
    for _, x in cands[:2]:
        res = optimize.minimize(
            length, x, jac=True, method="SLSQP",
            constraints=[{"type": "eq", "fun": residual,
                          "jac": lambda y: _endpoint_jacobian(g, y.reshape(N, m1))}],
            options={"maxiter": opts.iterations, "ftol": 1e-12},
        )
        x = res.x if np.all(np.isfinite(res.x)) else x
        # minimum-norm Newton steps onto the constraint manifold
        for _ in range(5):
            jac = _endpoint_jacobian(g, x.reshape(N, m1))
            x = x - np.linalg.lstsq(jac, residual(x), rcond=None)[0]
        v = x.reshape(N, m1)
        end = _endpoint_from_origin(g, v)
        err = float(g.norm(g.multiply(g.inverse(end), target)))
        L = float(np.linalg.norm(v, axis=1).sum())
        key = (err > opts.tol, L if err <= opts.tol else err)
        if best is None or key < best[0]:
            best = (key, v, L, err)
        if err <= opts.tol:
            break
    return best[1], best[2], best[3]


def cc_distance(g: CarnotGroup, p, q, opts: CCOptions | None = None, **kwargs) -> DistanceEstimate:
    """Carnot-Caratheodory distance by direct transcription.

    The problem is reduced to ``d(0, w)`` with ``w = p^-1 q`` (left
    invariance) and to ``||w||_inf = 1`` (homogeneity), then solved with a
    penalty continuation followed by an equality-constrained polish.  The
    value is the length of an explicit path, so it is an upper bound whenever
    ``converged`` is true.
    """
    opts = opts or CCOptions(**kwargs)
    w = g.multiply(g.inverse(p), q)
    lower = float(np.linalg.norm(w[: g.m1]))
    N = opts.segments
    scale = float(g.norm(w))
    if scale == 0.0:
        return DistanceEstimate(0.0, 0.0, ControlPath(np.zeros((N, g.m1))), True)
    if g.step == 1 or not np.any(w[g.m1:]):
        # a straight horizontal segment meets the projection lower bound
        ctrl = np.tile(w[: g.m1], (N, 1))
        return DistanceEstimate(lower, lower, ControlPath(ctrl), True)
    if g.step > 2 or g.law is not None:
        raise StructureError("cc_distance supports the built-in step <= 2 law")
    target = g.dilate(1.0 / scale, w)
    v, L, err = _solve_unit(g, target, opts)
    path = ControlPath(v * N * scale, 1.0)
    return DistanceEstimate(L * scale, lower, path, err <= opts.tol, err * scale)


def polygon_optimum(segments: int, area: float) -> float:
    """Shortest closed-up N-gon path reaching vertical coordinate ``area`` in H^1.

    Among N-gons of given perimeter the regular one encloses the largest
    area, ``P^2 / (4 N tan(pi/N))``; in H^1 the vertical coordinate of a
    closed horizontal loop equals its signed enclosed area.
    """
    return math.sqrt(4 * segments * math.tan(math.pi / segments) * abs(area))


# -- regions and sampling -------------------------------------------------------------


class Box:
    """Axis-aligned coordinate box."""

    def __init__(self, lo, hi):
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        if self.lo.shape != self.hi.shape or np.any(self.hi < self.lo):
            raise DomainError("malformed box")
        if not (np.all(np.isfinite(self.lo)) and np.all(np.isfinite(self.hi))):
            raise DomainError("box must be bounded")

    @classmethod
    def from_ranges(cls, ranges) -> "Box":
        r = np.asarray(ranges, dtype=float)
        return cls(r[:, 0], r[:, 1])

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def volume(self) -> float:
        return float(np.prod(self.hi - self.lo))

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x)
        return np.all((x >= self.lo) & (x <= self.hi), axis=-1)

    def sample(self, rng, size: int) -> np.ndarray:
        return rng.uniform(self.lo, self.hi, size=(int(size), self.dim))

    def bounding_box(self) -> "Box":
        return self

    def corners(self) -> np.ndarray:
        import itertools

        return np.array(list(itertools.product(*zip(self.lo, self.hi))))

    def to_dict(self) -> dict:
        return {"box": np.stack([self.lo, self.hi], axis=1).tolist()}


class DinfBall:
    """Open d_inf ball ``{x : ||center^-1 x|| < r}``."""

    def __init__(self, g: CarnotGroup, center, r: float):
        if r <= 0:
            raise DomainError("ball radius must be positive")
        self.g, self.center, self.r = g, g.check(center).astype(float), float(r)

    @property
    def dim(self) -> int:
        return self.g.n

    @property
    def volume(self) -> float:
        return self.g.ball_volume(self.r)

    def contains(self, x) -> np.ndarray:
        return self.g.distance(self.center, x) < self.r

    def sample(self, rng, size: int) -> np.ndarray:
        return self.g.multiply(self.center, _rejection_centered(self.g, rng, self.r, size))

    def boundary_probes(self, rng, size: int) -> np.ndarray:
        half = self.g.ball_box(self.r)
        y = rng.uniform(-half, half, size=(int(size), self.dim))
        nrm = self.g.norm(y)
        y = self.g.dilate(self.r * (1 - 1e-12) / np.maximum(nrm, 1e-300), y)
        return self.g.multiply(self.center, y)

    def bounding_box(self) -> Box:
        probes = self.boundary_probes(generator(0, 43), 4000)
        lo, hi = probes.min(axis=0), probes.max(axis=0)
        pad = 0.05 * (hi - lo) + 1e-12
        return Box(lo - pad, hi + pad)

    def to_dict(self) -> dict:
        return {"ball": {"center": self.center.tolist(), "radius": self.r}}


def _rejection_centered(g: CarnotGroup, rng, r: float, size: int,
                        accept: Callable | None = None, half=None) -> np.ndarray:
    half = g.ball_box(r) if half is None else half
    accept = accept or (lambda y: g.norm(y) < r)
    out, need, drawn, kept = [], int(size), 0, 0
    while need > 0:
        batch = max(2 * need, 256)
        y = rng.uniform(-half, half, size=(batch, g.n))
        y = y[accept(y)]
        drawn += batch
        kept += len(y)
        if drawn >= 100_000 and kept / drawn < 1e-4:
            raise SamplingError(f"acceptance rate {kept / drawn:.2e} below 1e-4")
        out.append(y[:need])
        need -= len(out[-1])
    return np.concatenate(out) if out else np.zeros((0, g.n))


def cc_ball_box(g: CarnotGroup, r: float) -> np.ndarray:
    """Half widths of a box certainly containing the CC ball of radius r.

    A horizontal path of length L moves the first layer by at most L and the
    k-th second-layer coordinate by at most ``|b^k|_2 L^2 / 2``.
    """
    half = [np.full(g.m1, r)]
    if g.step == 2:
        half.append(0.5 * np.linalg.norm(g.bracket, ord=2, axis=(1, 2)) * r * r)
    return np.concatenate(half)


def sample_ball(g: CarnotGroup, center, r: float, metric: str = "dinf", n: int = 1000,
                seed: int = 0, cc_opts: CCOptions | None = None) -> np.ndarray:
    """n points of the open ball of radius r about center.

    ``metric="cc"`` accepts a point when a CC path of length <= r reaching it
    is found; points inside but not certified are rejected, which biases
    volume estimates low.
    """
    if r <= 0:
        raise DomainError("ball radius must be positive")
    rng = generator(seed, 47)
    center = g.check(center)
    if metric == "dinf":
        y = _rejection_centered(g, rng, r, n)
    elif metric == "cc":
        opts = cc_opts or CCOptions(segments=16, restarts=2, iterations=150)
        zero = g.identity()

        def inside(batch):
            return np.array([cc_distance(g, zero, b, opts).value < r for b in batch], dtype=bool)

        y = _rejection_centered(g, rng, r, n, accept=inside, half=cc_ball_box(g, r))
    else:
        raise DomainError(f"unknown metric {metric!r}")
    return g.multiply(center, y)


# -- Monte-Carlo measure ---------------------------------------------------------------


@dataclass
class MeasureEstimate:
    value: float
    stderr: float
    samples: int
    extra: dict = field(default_factory=dict)


def _as_box(box) -> Box:
    return box if isinstance(box, Box) else Box.from_ranges(box)


def mc_measure(indicator: Callable[[np.ndarray], np.ndarray], box, n: int, seed: int,
               workers: int = 1, stream: int = 0) -> MeasureEstimate:
    """Hit-or-miss estimate of the Lebesgue measure of ``{indicator} & box``."""
    box = _as_box(box)

    def shard(rng, size):
        return int(np.count_nonzero(indicator(box.sample(rng, size))))

    hits = sum(map_shards(shard, n, seed, stream=1000 + stream, workers=workers))
    p = hits / n
    vol = box.volume
    return MeasureEstimate(vol * p, vol * math.sqrt(p * (1 - p) / n), int(n), {"hits": hits, "box_volume": vol})


def mc_integral(integrand: Callable[[np.ndarray], np.ndarray], region, n: int, seed: int,
                workers: int = 1, stream: int = 0) -> MeasureEstimate:
    """Plain Monte-Carlo integral over a region with ``sample`` and ``volume``."""
    region = _as_box(region) if not hasattr(region, "sample") else region

    def shard(rng, size):
        vals = np.asarray(integrand(region.sample(rng, size)), dtype=float)
        return float(vals.sum()), float((vals * vals).sum())

    parts = map_shards(shard, n, seed, stream=2000 + stream, workers=workers)
    s1 = stable_sum(p[0] for p in parts)
    s2 = stable_sum(p[1] for p in parts)
    mean = s1 / n
    var = max(s2 / n - mean * mean, 0.0)
    vol = region.volume
    return MeasureEstimate(vol * mean, vol * math.sqrt(var / n), int(n))


def ratio_stderr(a: MeasureEstimate, b: MeasureEstimate) -> float:
    """Delta-method standard error of a.value / b.value for independent estimates."""
    ratio = a.value / b.value
    return abs(ratio) * math.hypot(a.stderr / a.value, b.stderr / b.value)


# -- metric equivalence -----------------------------------------------------------------


def equivalence_band(g: CarnotGroup, pairs: Sequence[tuple[np.ndarray, np.ndarray]],
                     opts: CCOptions | None = None) -> tuple[float, float]:
    """min and max of d_inf / d_cc over the given pairs."""
    ratios = []
    for p, q in pairs:
        dc = cc_distance(g, p, q, opts).value
        if dc > 0:
            ratios.append(float(g.distance(p, q)) / dc)
    return min(ratios), max(ratios)
