"""N-functions: conjugation, Luxemburg norms, integrability tests and phi construction."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import optimize

from ..errors import DomainError, RangeError
from .fields import SampledScalarField

DEFAULT_GRID = np.logspace(-8, 12, 1201)
_GOLDEN = (math.sqrt(5) - 1) / 2
_NODES, _WEIGHTS = np.polynomial.legendre.leggauss(40)


@dataclass(eq=False)
class NFunction:
    """Convex ``A: [0, inf) -> [0, inf)`` vanishing only at 0 with superlinear growth.

    ``grid`` holds the log-spaced abscissae used for numeric conjugation.
    """

    eval: Callable[[np.ndarray], np.ndarray]
    name: str = "A"
    grid: np.ndarray = field(default_factory=lambda: DEFAULT_GRID.copy())
    derivative: Callable[[np.ndarray], np.ndarray] | None = None
    _table: np.ndarray | None = field(default=None, repr=False)

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise DomainError(f"{self.name} is defined on [0, inf)")
        with np.errstate(over="ignore"):
            return np.asarray(self.eval(t), dtype=float)

    def tabulate(self) -> np.ndarray:
        """Values on ``grid`` (computed once)."""
        if self._table is None:
            self._table = self(self.grid)
        return self._table

    def slope_at(self, t: float) -> float:
        if self.derivative is not None:
            return float(self.derivative(np.asarray(t, dtype=float)))
        h = 1e-6 * max(t, 1.0)
        return float((self(t + h) - self(t - h)) / (2 * h))

    def validate(self) -> None:
        if float(self(0.0)) != 0.0:
            raise DomainError(f"{self.name}(0) must be 0")
        vals = self.tabulate()
        fin = np.isfinite(vals)
        if np.any(np.diff(vals[fin]) <= 0) or np.any(vals[fin] <= 0):
            raise DomainError(f"{self.name} is not strictly increasing and positive on its grid")
        ratio = vals[fin] / self.grid[fin]
        if np.any(np.diff(ratio) < -1e-9 * ratio[1:]) or not (ratio[0] < 1e-2 and ratio[-1] > 1e2):
            raise DomainError(f"{self.name}(t)/t does not grow from 0 to infinity on its grid")


def power(p: float) -> NFunction:
    """``t^p / p``."""
    if p <= 1:
        raise DomainError("power N-functions need p > 1")
    return NFunction(lambda t: t ** p / p, f"power:{p:g}", derivative=lambda t: t ** (p - 1))


def monomial(p: float) -> NFunction:
    """``t^p``."""
    if p <= 1:
        raise DomainError("monomial N-functions need p > 1")
    return NFunction(lambda t: t ** p, f"monomial:{p:g}", derivative=lambda t: p * t ** (p - 1))


def exponential() -> NFunction:
    """``e^t - t - 1``."""
    return NFunction(lambda t: np.expm1(t) - t, "exp", derivative=np.expm1)


def power_log(p: float, beta: float) -> NFunction:
    """``t^p log(1 + t)^beta``."""
    if p < 1 or (p == 1 and beta <= 0):
        raise DomainError("power-log N-functions need superlinear growth")
    return NFunction(lambda t: t ** p * np.log1p(t) ** beta, f"power-log:{p:g},{beta:g}")


def parse_nfunction(spec: str) -> NFunction:
    """``power:p``, ``monomial:p``, ``exp`` or ``power-log:p,beta``."""
    kind, _, args = spec.partition(":")
    try:
        nums = [float(a) for a in args.split(",")] if args else []
        if kind == "power" and len(nums) == 1:
            return power(nums[0])
        if kind == "monomial" and len(nums) == 1:
            return monomial(nums[0])
        if kind == "exp" and not nums:
            return exponential()
        if kind == "power-log" and len(nums) == 2:
            return power_log(*nums)
    except ValueError:
        pass
    raise DomainError(f"unknown N-function {spec!r}")


# -- Young conjugate ----------------------------------------------------------------------


def _conjugate_values(A: NFunction, t: np.ndarray, chunk: int = 1024) -> np.ndarray:
    s = A.grid
    As = A.tabulate()
    As = np.where(np.isfinite(As), As, np.inf)
    t = np.asarray(t, dtype=float)
    flat = t.ravel()
    out = np.zeros_like(flat)
    for start in range(0, len(flat), chunk):
        tc = flat[start:start + chunk]
        vals = tc[:, None] * s[None, :] - As[None, :]
        k = np.argmax(vals, axis=1)
        if np.any((k == len(s) - 1) & (tc > 0)):
            bad = tc[(k == len(s) - 1) & (tc > 0)].min()
            raise RangeError(f"conjugate of {A.name} at t={bad:g} needs s beyond {s[-1]:g}; extend the grid")
        lo = np.where(k > 0, s[np.maximum(k - 1, 0)], 0.0)
        hi = s[np.minimum(k + 1, len(s) - 1)]
        # vectorised golden-section refinement of the bracketing cell
        a, b = lo, hi
        c, d = b - _GOLDEN * (b - a), a + _GOLDEN * (b - a)
        fc, fd = tc * c - A(c), tc * d - A(d)
        for _ in range(90):
            left = fc > fd
            a, b = np.where(left, a, c), np.where(left, d, b)
            c, d = np.where(left, b - _GOLDEN * (b - a), d), np.where(left, c, a + _GOLDEN * (b - a))
            fc, fd = np.where(left, tc * c - A(c), fd), np.where(left, fc, tc * d - A(d))
        best = np.maximum(vals[np.arange(len(tc)), k], np.maximum(fc, fd))
        out[start:start + chunk] = np.maximum(best, 0.0)
    return out.reshape(t.shape)


def young_conjugate(A: NFunction) -> NFunction:
    """Numeric ``sup_{s>0} (s t - A(s))`` on A's grid, refined by golden section.

    The conjugate's own grid keeps the points of A's grid below the last
    tabulated slope of A, where the supremum is attained inside the table;
    this lets the conjugate be conjugated again.
    """
    vals = A.tabulate()
    fin = np.isfinite(vals)
    s, v = A.grid[fin], vals[fin]
    top = float((v[-1] - v[-2]) / (s[-1] - s[-2]))
    grid = A.grid[A.grid < top]
    return NFunction(lambda t: _conjugate_values(A, t), f"conj({A.name})", grid=grid)


# -- Luxemburg norm -------------------------------------------------------------------------


def luxemburg_norm(A: NFunction, u: SampledScalarField, rtol: float = 1e-13) -> float:
    """``inf{lam > 0 : sum w A(|u| / lam) <= 1}`` by bracketing and Brent's method."""
    a = np.abs(u.values)
    if not np.all(np.isfinite(a)):
        raise DomainError("values must be finite")
    if not np.any(a > 0):
        return 0.0

    def excess(lam):
        with np.errstate(over="ignore"):
            return float(np.dot(u.weights, A(a / lam))) - 1.0

    hi = float(a.max())
    while excess(hi) > 0:
        hi *= 2.0
    lo = hi
    while excess(lo) <= 0:
        lo *= 0.5
    # keep the lower bracket finite for fast-growing A
    while not np.isfinite(excess(lo)):
        lo = 0.5 * (lo + hi)
    return float(optimize.brentq(excess, lo, hi, xtol=1e-300, rtol=rtol, maxiter=500))


# -- integrals of power-like tails -----------------------------------------------------------


def _decade_quadrature(h: Callable, lo_exp: float, hi_exp: float) -> float:
    """``int h(t) dt`` over ``[10^lo, 10^hi]`` with Gauss-Legendre per decade in log t."""
    total = 0.0
    edges = np.arange(lo_exp, hi_exp + 1e-12, 1.0)
    if edges[-1] < hi_exp:
        edges = np.append(edges, hi_exp)
    ln10 = math.log(10.0)
    for a, b in zip(edges[:-1], edges[1:]):
        u = 0.5 * (b - a) * _NODES + 0.5 * (a + b)
        t = 10.0 ** u
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            vals = np.nan_to_num(h(t), nan=0.0, posinf=np.inf)
        total += 0.5 * (b - a) * ln10 * float(np.dot(_WEIGHTS, vals * t))
    return total


@dataclass
class TailFit:
    verdict: str  # "converges", "diverges" or "indeterminate"
    exponent: float
    log_exponent: float
    remainder: float


def _fit_tail(h: Callable, t: np.ndarray, end: float, band: float, at_zero: bool = False) -> TailFit:
    """Classify ``int h`` beyond ``end`` from a local fit ``h ~ c t^a (log t)^b``.

    ``at_zero`` handles the integral over ``(0, end)`` instead of ``(end, inf)``.
    """
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        y = np.log(h(t))
    if np.any(~np.isfinite(y)) or np.any(np.isnan(y)):
        # faster-than-power decay (overflowing A) or vanishing integrand
        if np.all(np.nan_to_num(h(t), nan=0.0) == 0) or np.any(y == -np.inf):
            return TailFit("converges", -np.inf, 0.0, 0.0)
        raise RangeError("integrand not finite on the tail window")
    lt = np.log(t)
    alpha, c0 = np.polyfit(lt, y, 1)
    crit = -1.0
    sign = -1.0 if at_zero else 1.0  # at zero convergence needs alpha > -1
    # power regime
    if sign * (alpha - crit) < -band:
        hend = math.exp(c0 + alpha * math.log(end))
        rem = hend * end / abs(alpha + 1)
        return TailFit("converges", float(alpha), 0.0, rem)
    if sign * (alpha - crit) > band:
        return TailFit("diverges", float(alpha), 0.0, math.inf)
    # critical power: fit the logarithmic correction with the exponent pinned at -1
    ll = np.log(np.abs(lt))
    gamma, c1 = np.polyfit(ll, y + lt, 1)
    if gamma < -1 - band:
        L = abs(math.log(end))
        rem = math.exp(c1) * L ** (gamma + 1) / abs(gamma + 1)
        return TailFit("converges", -1.0, float(gamma), rem)
    if gamma > -1 + band:
        return TailFit("diverges", -1.0, float(gamma), math.inf)
    return TailFit("indeterminate", -1.0, float(gamma), math.nan)


@dataclass
class IntegrabilityReport:
    verdict: str  # "holds", "fails" or "indeterminate"
    integral: float
    dual_integral: float
    dual_verdict: str
    tail_exponent: float
    log_exponent: float

    @property
    def holds(self) -> bool | None:
        return {"holds": True, "fails": False}.get(self.verdict)


_VERDICT = {"converges": "holds", "diverges": "fails", "indeterminate": "indeterminate"}


def check_integrability_condition(A: NFunction, Q: float, decades: int = 12, band: float = 0.05,
                                  dual_decades: int = 10, dual_band: float = 0.01) -> IntegrabilityReport:
    """Finiteness of ``int_1^inf (t / A(t))^{1/(Q-1)} dt``.

    The integral is computed decade by decade and the tail beyond
    ``10^decades`` is classified by a fitted power (and, at the critical
    exponent -1, logarithmic) law.  The dual integral
    ``int_1^inf A~(t) / t^{1+Q'} dt`` with the numeric conjugate is
    evaluated the same way as a cross-check; its exponents sit closer to the
    critical value, hence the narrower ``dual_band``.
    """
    if Q <= 1:
        raise DomainError("Q must exceed 1")
    expo = 1.0 / (Q - 1)

    def h(t):
        return (t / A(t)) ** expo

    window = np.logspace(decades - 4, decades, 41)
    fit = _fit_tail(h, window, 10.0 ** decades, band)
    body = _decade_quadrature(h, 0.0, float(decades))
    integral = body + fit.remainder if fit.verdict == "converges" else (
        math.inf if fit.verdict == "diverges" else math.nan)

    Qd = Q / (Q - 1)
    conj = young_conjugate(A)

    def hd(t):
        return conj(t) / t ** (1 + Qd)

    try:
        dwin = np.logspace(dual_decades - 2, dual_decades, 21)
        dfit = _fit_tail(hd, dwin, 10.0 ** dual_decades, dual_band)
        dbody = _decade_quadrature(hd, 0.0, float(dual_decades))
        dual = dbody + dfit.remainder if dfit.verdict == "converges" else (
            math.inf if dfit.verdict == "diverges" else math.nan)
        dverdict = _VERDICT[dfit.verdict]
    except RangeError:
        dual, dverdict = math.nan, "indeterminate"
    return IntegrabilityReport(_VERDICT[fit.verdict], integral, dual, dverdict, fit.exponent, fit.log_exponent)


# -- phi construction -----------------------------------------------------------------------------


def F_phi(phi: Callable, s, Q: float) -> np.ndarray:
    """``s phi(s)^{1/Q - 1}``, with value 0 at s = 0."""
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise DomainError("F_phi is defined for s >= 0")
    pos = s > 0
    out = np.zeros_like(s)
    if np.any(pos):
        ph = np.asarray(phi(s[pos]), dtype=float)
        if np.any(ph <= 0):
            raise DomainError("phi must be positive")
        out[pos] = s[pos] * ph ** (1.0 / Q - 1.0)
    return out if out.ndim else float(out)


@dataclass
class PhiBuild:
    """``phi(t) = (A(lam t) / t)^{Q/(1-Q)}`` together with its integrals.

    ``integral`` is ``int_0^inf phi^{1/Q}``; ``base_integral`` is
    ``int_0^inf (t / A(t))^{1/(Q-1)} dt`` for the N-function actually used.
    """

    A: NFunction
    lambda_bar: float
    Q: float
    modified: bool
    q: float | None
    base_integral: float
    integral: float

    def log_phi(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore"):
            return self.Q / (1.0 - self.Q) * (np.log(self.A(self.lambda_bar * t)) - np.log(t))

    def phi(self, t) -> np.ndarray:
        return np.exp(self.log_phi(t))

    def F(self, s) -> np.ndarray:
        """``F_phi`` evaluated through ``log phi``, so it stays finite where phi underflows."""
        s = np.asarray(s, dtype=float)
        if np.any(s < 0):
            raise DomainError("F_phi is defined for s >= 0")
        out = np.zeros_like(s)
        pos = s > 0
        out[pos] = s[pos] * np.exp((1.0 / self.Q - 1.0) * self.log_phi(s[pos]))
        return out if out.ndim else float(out)


def build_phi(A: NFunction, lambda_bar: float, Q: float, check_points: int = 1001,
              band: float = 0.05) -> PhiBuild:
    """Build phi from an N-function satisfying the integrability condition at infinity.

    When ``int_0^1 (t / A)^{1/(Q-1)}`` diverges, A is replaced on [0, 1] by
    ``max(A(t), A(1) t^q)`` with ``q = min((1 + Q)/2, A'(1)/A(1))``; the
    result stays convex, agrees with A on [1, inf) and makes the integral
    near 0 finite.
    """
    if lambda_bar <= 0 or Q <= 1:
        raise DomainError("need lambda_bar > 0 and Q > 1")
    expo = 1.0 / (Q - 1)
    rep = check_integrability_condition(A, Q)
    if rep.verdict != "holds":
        raise DomainError(f"{A.name} does not satisfy the integrability condition for Q={Q:g} ({rep.verdict})")

    def near_zero(B):
        return _fit_tail(lambda t: (t / B(t)) ** expo, np.logspace(-14, -10, 41), 1e-14, band, at_zero=True)

    fit0 = near_zero(A)
    used, modified, q = A, False, None
    if fit0.verdict != "converges":
        A1 = float(A(1.0))
        q = min((1.0 + Q) / 2.0, A.slope_at(1.0) / A1)
        base = A

        def mod(t, base=base, A1=A1, q=q):
            t = np.asarray(t, dtype=float)
            return np.where(t < 1.0, np.maximum(base(np.minimum(t, 1.0)), A1 * np.minimum(t, 1.0) ** q), base(t))

        used = NFunction(mod, f"{A.name}|mod{q:g}", grid=A.grid.copy())
        modified = True
        fit0 = near_zero(used)
        if fit0.verdict != "converges":
            raise DomainError("could not regularise the N-function near 0")

    def h(t):
        return (t / used(t)) ** expo

    base_integral = fit0.remainder + _decade_quadrature(h, -14.0, 0.0) + rep.integral
    integral = lambda_bar ** (Q / (1.0 - Q)) * base_integral
    out = PhiBuild(used, float(lambda_bar), float(Q), modified, q, float(base_integral), float(integral))

    t = np.logspace(-6, 6, check_points)
    ph = out.phi(t)
    if np.any(np.diff(ph) > 1e-12 * ph[:-1]):
        raise DomainError("phi increases on the check grid; A is not convex")
    return out
