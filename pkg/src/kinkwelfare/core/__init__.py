"""Benefit schedule, search model, simulation, RKD and welfare components."""

from .errors import (
    BandwidthError,
    ConfigError,
    EmptyWindowError,
    EstimationError,
    KinkWelfareError,
    ModelError,
    ScheduleError,
    SingularDesignError,
    SolverError,
    WelfareError,
)
from .rkd import RkdFit, RkdSpec, fit_rkd, fuzzy_rkd, pooled_two_kink_rkd, sharp_rkd
from .schedule import BenefitRule, EligibilityTable, ScheduleConfig, WageConversion
from .search_model import ModelParams, ModelSolution, benefit_derivatives, solve_model
from .synth import SimConfig, SpellRecord, simulate_population
from .welfare import WelfareInputs, WelfareResult, calibrate_formula

__all__ = [
    "BenefitRule",
    "EligibilityTable",
    "ScheduleConfig",
    "WageConversion",
    "ModelParams",
    "ModelSolution",
    "solve_model",
    "benefit_derivatives",
    "SimConfig",
    "SpellRecord",
    "simulate_population",
    "RkdSpec",
    "RkdFit",
    "fit_rkd",
    "sharp_rkd",
    "fuzzy_rkd",
    "pooled_two_kink_rkd",
    "WelfareInputs",
    "WelfareResult",
    "calibrate_formula",
    "KinkWelfareError",
    "ScheduleError",
    "ModelError",
    "SolverError",
    "EstimationError",
    "SingularDesignError",
    "EmptyWindowError",
    "BandwidthError",
    "WelfareError",
    "ConfigError",
]
