"""Differentially private linear query answering for several analysts sharing one budget."""
from .errors import (ConfigError, DimensionError, InfeasibleStrategyError, MadpError,
                     NumericalError, OptimizationFailedError, ParseError, PreconditionError,
                     ResourceError)
from .workloads import Workload
from .strategy import Strategy
from .privacy import PrivacyBudget
from .mechanisms import AnalystProfile, MechanismPlan, build_plan, execute_plan, plan_expected_errors

__version__ = "0.1.0"
