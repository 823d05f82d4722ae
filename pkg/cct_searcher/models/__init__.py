from .boundary import PseudoEpClass, classify_boundary_point
from .equilibrium import Equilibrium, EquilibriumKind, find_equilibrium
from .machines import (
    SMIB_BASE,
    SMIB_PARAMETERS,
    build_scenario,
    multimachine_model,
    smib_model,
    symbolic_model,
)
from .parametric import ConstraintSet, ParametricModel
from .scenario import (
    Scenario,
    load_scenario,
    read_scenario_file,
    shipped_scenarios,
    validate_feasibility_boundary,
)

__all__ = [
    "ConstraintSet",
    "Equilibrium",
    "EquilibriumKind",
    "ParametricModel",
    "PseudoEpClass",
    "SMIB_BASE",
    "SMIB_PARAMETERS",
    "Scenario",
    "build_scenario",
    "classify_boundary_point",
    "find_equilibrium",
    "load_scenario",
    "multimachine_model",
    "read_scenario_file",
    "shipped_scenarios",
    "smib_model",
    "symbolic_model",
    "validate_feasibility_boundary",
]
