"""Configured check suites, reports and the series exporter behind the ``ckit`` command."""

from .config import ExperimentConfig, build_map, load_config
from .plots import emit_plots
from .report import Record, RunReport
from .suites import (
    run_area_suite,
    run_dist_suite,
    run_function_space_suite,
    run_group_suite,
    run_pansu_suite,
    run_qvar_suite,
    run_riesz_suite,
    run_stein_demo,
)

__all__ = [
    "ExperimentConfig",
    "Record",
    "RunReport",
    "build_map",
    "emit_plots",
    "load_config",
    "run_area_suite",
    "run_dist_suite",
    "run_function_space_suite",
    "run_group_suite",
    "run_pansu_suite",
    "run_qvar_suite",
    "run_riesz_suite",
    "run_stein_demo",
]
