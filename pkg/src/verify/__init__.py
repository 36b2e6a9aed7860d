from .base_check import BaseCheck, CheckReport, Verdict
from .fields import random_admissible_fields, sign_changing_samples
from .inequalities import convexity_check, poincare_check, lattice_check
from .eigenfunction import (
    positivity_check,
    simplicity_check,
    sign_change_check,
    gap_check,
    monotonicity_check
)
from .regularity import harnack_check, holder_check, refinement_stable
from .suite import SuiteOptions, run_suite, exit_code

__all__ = [
    "BaseCheck",
    "CheckReport",
    "Verdict",
    "random_admissible_fields",
    "sign_changing_samples",
    "convexity_check",
    "poincare_check",
    "lattice_check",
    "positivity_check",
    "simplicity_check",
    "sign_change_check",
    "gap_check",
    "monotonicity_check",
    "harnack_check",
    "holder_check",
    "refinement_stable",
    "SuiteOptions",
    "run_suite",
    "exit_code"
]
