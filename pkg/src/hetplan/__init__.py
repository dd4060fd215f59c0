"""Planning tools for two-tier cellular networks serving static and mobile users."""
from .model import (DesignPoint, InfeasibleDesignError, MetricBundle, NetworkParams,
                    ParameterError, UserParams, ValidationReport, solve_equivalent_pmacro, validate)
from .specfun import QuadratureError, QuadratureSpec

__all__ = [
    "DesignPoint", "InfeasibleDesignError", "MetricBundle", "NetworkParams", "ParameterError",
    "QuadratureError", "QuadratureSpec", "UserParams", "ValidationReport",
    "solve_equivalent_pmacro", "validate",
]
