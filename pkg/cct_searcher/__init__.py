from .cct_searcher import CriticalClearingTimeSearcher, classify_category, find_cct
from .critical_result import CriticalResult
from .csr_map import CsrGrid, map_csr
from .integrator import Event, SensTrajectory, integrate
from .models import (
    ConstraintSet,
    Equilibrium,
    EquilibriumKind,
    ParametricModel,
    PseudoEpClass,
    Scenario,
    classify_boundary_point,
    find_equilibrium,
    load_scenario,
    multimachine_model,
    smib_model,
    symbolic_model,
)
from .oracle import FdSpec, closed_form_faulton, fd_cct_sensitivity
from .sensitivity import (
    SensIngredients,
    SensitivityReport,
    compute_ingredients,
    sensitivity_report,
)
from .sweep import SweepSpec, run_sweep

__all__ = [
    "CriticalClearingTimeSearcher",
    "CriticalResult",
    "ConstraintSet",
    "CsrGrid",
    "Equilibrium",
    "EquilibriumKind",
    "Event",
    "FdSpec",
    "ParametricModel",
    "PseudoEpClass",
    "Scenario",
    "SensIngredients",
    "SensTrajectory",
    "SensitivityReport",
    "SweepSpec",
    "classify_boundary_point",
    "classify_category",
    "closed_form_faulton",
    "compute_ingredients",
    "fd_cct_sensitivity",
    "find_cct",
    "find_equilibrium",
    "integrate",
    "load_scenario",
    "map_csr",
    "multimachine_model",
    "run_sweep",
    "sensitivity_report",
    "smib_model",
    "symbolic_model",
]
