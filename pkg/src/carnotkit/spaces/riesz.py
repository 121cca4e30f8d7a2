"""Riesz potentials and the Orlicz-type potential inequality."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DomainError, UnsupportedError
from ..groups import CarnotGroup
from .fields import SampledScalarField
from .orlicz import PhiBuild


def riesz_constant_surrogate(g: CarnotGroup, unit_ball_volume: float | None = None) -> float:
    """``(1 + P)^Q`` with the perimeter P of the unit ball replaced by ``Q |U_1|``.

    ``Q |U_1|`` is ``d/dr |U_r|`` at r = 1, and it is exactly the constant
    for which ``int_{U_rho} ||x||^{1-Q} dx = Q |U_1| rho`` holds.
    """
    Q = g.hom_dim
    vol = g.ball_volume(1.0) if unit_ball_volume is None else unit_ball_volume
    return float((1.0 + Q * vol) ** Q)


def riesz_potential(field: SampledScalarField, g: CarnotGroup, z, Q: float | None = None,
                    metric: str = "dinf") -> float:
    """``sum_i w_i d(x_i, z)^{1-Q} g_i``."""
    if metric != "dinf":
        raise UnsupportedError("riesz_potential evaluates d_inf only")
    if len(field) == 0:
        return 0.0
    if field.points is None:
        raise DomainError("the field needs sample points")
    Q = g.hom_dim if Q is None else Q
    d = g.distance(np.asarray(z, dtype=float), field.points)
    if np.any(d == 0):
        raise DomainError("a sample coincides with z; resample")
    return float(np.dot(field.weights, d ** (1.0 - Q) * field.values))


@dataclass
class RieszCheck:
    lhs: float  # potential ** Q
    rhs: float
    ratio: float
    holds: bool
    empirical_constant: float  # lhs / (I1^{Q-1} I2), the smallest admissible C_Q
    C_Q: float
    I1: float
    I2: float
    metric: str = "dinf"

    def to_dict(self) -> dict:
        return {k: (float(v) if isinstance(v, (float, np.floating)) else v) for k, v in self.__dict__.items()}


def riesz_inequality_check(field: SampledScalarField, g: CarnotGroup, z, phi: PhiBuild,
                           C_Q: float | None = None, metric: str = "dinf") -> RieszCheck:
    """Compare ``(int d(x,z)^{1-Q} g)^Q`` with ``C_Q I1^{Q-1} int F_phi(g)``."""
    if np.any(field.values < 0):
        raise DomainError("g must be non-negative")
    Q = phi.Q
    C_Q = riesz_constant_surrogate(g) if C_Q is None else float(C_Q)
    lhs = riesz_potential(field, g, z, Q, metric) ** Q
    I1 = phi.integral
    I2 = float(np.dot(field.weights, phi.F(field.values)))
    base = I1 ** (Q - 1) * I2
    rhs = C_Q * base
    ratio = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else np.inf)
    emp = lhs / base if base > 0 else 0.0
    return RieszCheck(float(lhs), float(rhs), float(ratio), bool(lhs <= rhs), float(emp), C_Q, I1, I2, metric)
