"""Heavy-traffic approximation of the drifted supremum of heavy-tailed linear processes.

The process is ``S_n = sum_{0 <= i < n} g_i X_{n-i}`` with fractional or
FARIMA-type coefficients ``g_i`` and innovations in the domain of attraction
of an ``alpha``-stable law, ``1 < alpha < 2``.  For ``alpha * gamma > 1`` the
scaled supremum ``max_n (S_n - a g_[0,n)) / F_*^<-(1 - 1/k^<-(1/a))``
converges as ``a -> 0`` to a functional of a Poisson process; this package
simulates both sides and compares them.
"""

from .coeffs import CoefficientEnvelope, CoefficientModel, envelope, fractional_coeffs
from .exceptions import (
    BracketError,
    ConfigError,
    DomainError,
    HeavyTrafficError,
    HorizonError,
    RegimeError,
    ValidationError,
)
from .innovations import ExactStable, LevyMeasure, TailTriple, TwoSidedPareto, make_innovation
from .limitsim import TruncationPolicy, default_policy, limit_cdf, mc_limit
from .pathsim import PathConfig, divergence_probe, filter_path, mc_prelimit
from .scaling import ScalingContext, regime
from .stats import SampleSet, compare_report, growth_exponent, ks_distance, quantiles

__version__ = "0.1.0"

__all__ = [
    "BracketError",
    "CoefficientEnvelope",
    "CoefficientModel",
    "ConfigError",
    "DomainError",
    "ExactStable",
    "HeavyTrafficError",
    "HorizonError",
    "LevyMeasure",
    "PathConfig",
    "RegimeError",
    "SampleSet",
    "ScalingContext",
    "TailTriple",
    "TruncationPolicy",
    "TwoSidedPareto",
    "ValidationError",
    "compare_report",
    "default_policy",
    "divergence_probe",
    "envelope",
    "filter_path",
    "fractional_coeffs",
    "growth_exponent",
    "ks_distance",
    "limit_cdf",
    "make_innovation",
    "mc_limit",
    "mc_prelimit",
    "quantiles",
    "regime",
]
