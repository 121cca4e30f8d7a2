"""Lorentz and Orlicz machinery, Riesz potentials and ball-family diagnostics."""

from .fields import SampledScalarField
from .lorentz import Rearrangement, distribution_function, lorentz_Q1_norm, lp_norm, rearrangement
from .orlicz import (
    IntegrabilityReport,
    NFunction,
    PhiBuild,
    F_phi,
    build_phi,
    check_integrability_condition,
    exponential,
    luxemburg_norm,
    monomial,
    parse_nfunction,
    power,
    power_log,
    young_conjugate,
)
from .riesz import RieszCheck, riesz_constant_surrogate, riesz_inequality_check, riesz_potential
from .stein import SteinNegative, SteinReport, loglog, loglog_gradient_norm, stein_negative, stein_positive
from .variation import (
    BallFamily,
    QACCurve,
    QVariation,
    RRReport,
    ball_candidates,
    max_inscribed_radius,
    oscillation,
    q_variation_lower,
    qac_modulus,
    rr_check,
    section,
    section_gradient_envelope,
)

__all__ = [
    "SampledScalarField",
    "Rearrangement",
    "distribution_function",
    "lorentz_Q1_norm",
    "lp_norm",
    "rearrangement",
    "IntegrabilityReport",
    "NFunction",
    "PhiBuild",
    "F_phi",
    "build_phi",
    "check_integrability_condition",
    "exponential",
    "luxemburg_norm",
    "monomial",
    "parse_nfunction",
    "power",
    "power_log",
    "young_conjugate",
    "RieszCheck",
    "riesz_constant_surrogate",
    "riesz_inequality_check",
    "riesz_potential",
    "SteinNegative",
    "SteinReport",
    "loglog",
    "loglog_gradient_norm",
    "stein_negative",
    "stein_positive",
    "BallFamily",
    "QACCurve",
    "QVariation",
    "RRReport",
    "ball_candidates",
    "max_inscribed_radius",
    "oscillation",
    "q_variation_lower",
    "qac_modulus",
    "rr_check",
    "section",
    "section_gradient_envelope",
]
