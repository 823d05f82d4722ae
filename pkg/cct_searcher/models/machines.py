"""
Builders for the scenarios: the single machine infinite bus system, classical
multi-machine systems and models given directly by expressions.
"""
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import sympy

from ..exception import (
    DimensionMismatch,
    InvalidParameter,
    ScenarioParseError,
)
from .parametric import ConstraintSet, ParametricModel
from .scenario import Scenario, validate_feasibility_boundary

__all__ = (
    "SMIB_BASE",
    "SMIB_PARAMETERS",
    "build_scenario",
    "multimachine_model",
    "smib_model",
    "symbolic_model",
)

SMIB_PARAMETERS = ("Pm", "M", "dmax", "wmax")
SMIB_BASE = (0.6, 0.25, 2.4434, 1.0)
SMIB_CONSTRAINTS = {"angle": "dmax - delta", "speed": "wmax - omega"}
SMIB_WINDOW = ((0.5, 3.0), (-1.5, 1.5))
DAMPING_RATIO = 4.0
TOPOLOGIES = ("pre", "fault", "post")


def _parse(text: Any, namespace: Mapping[str, Any], where: str) -> sympy.Expr:
    try:
        return sympy.sympify(text, locals=dict(namespace))
    except (sympy.SympifyError, SyntaxError, TypeError) as e:
        raise ScenarioParseError(f"{where}: cannot read {text!r}") from e


def _constraint_sets(
    config: Mapping[str, Any],
    states: Sequence[sympy.Symbol],
    params: Sequence[sympy.Symbol],
    namespace: Mapping[str, Any],
) -> Tuple[ConstraintSet, ConstraintSet]:
    shared = dict(config.get("constraints", {}))
    sets = []
    for topology in ("fault", "post"):
        named = dict(shared)
        named.update(config.get(f"constraints.{topology}", {}))
        if not named:
            raise ScenarioParseError(f"no constraints for the {topology} topology")
        exprs = [
            _parse(text, namespace, f"constraint {name}")
            for name, text in named.items()
        ]
        sets.append(ConstraintSet(states, params, exprs, list(named)))
    return sets[0], sets[1]


def _finish(
    config: Dict[str, Any],
    models: Sequence[ParametricModel],
    states: Sequence[sympy.Symbol],
    params: Sequence[sympy.Symbol],
    namespace: Mapping[str, Any],
    positive: Sequence[str],
    validate: bool,
) -> Scenario:
    h_fault, h_post = _constraint_sets(config, states, params, namespace)
    scenario = Scenario(
        config["name"],
        *models,
        h_fault,
        h_post,
        param_names=[str(s) for s in params],
        p0=[config["parameters"][str(s)] for s in params],
        t_max=config.get("t_max", 10.0),
        sep_guess=config.get("sep_guess"),
        positive_parameters=positive,
        window=config.get("window"),
        config=config,
    )
    if validate:
        validate_feasibility_boundary(scenario, scenario.p0)
    return scenario


def smib_model(
    params: Sequence[float] = SMIB_BASE,
    *,
    damping: float = 0.5,
    ev_x: Tuple[float, float, float] = (1.0, 0.0, 1.0),
    constraints: Optional[Mapping[str, str]] = None,
    t_max: float = 10.0,
    name: str = "smib",
    validate: bool = True,
) -> Scenario:
    """
    The single machine infinite bus system

        d(delta)/dt = omega,  M d(omega)/dt = Pm - K sin(delta) - D omega

    where K = EV/X is (1, 0, 1) for the pre-fault, fault-on and post-fault
    topology and the parameters are [Pm, M, dmax, wmax] with the constraints
    dmax - delta > 0 and wmax - omega > 0.
    """
    if len(params) != len(SMIB_PARAMETERS):
        raise DimensionMismatch(f"expected parameters {', '.join(SMIB_PARAMETERS)}")
    config: Dict[str, Any] = {
        "name": name,
        "kind": "smib",
        "t_max": t_max,
        "window": [list(row) for row in SMIB_WINDOW],
        "parameters": dict(zip(SMIB_PARAMETERS, (float(v) for v in params))),
        "constants": {"D": damping},
        "constraints": dict(constraints or SMIB_CONSTRAINTS),
    }
    for topology, value in zip(TOPOLOGIES, ev_x):
        config[topology] = {"ev_x": value}
    return build_scenario(config, validate=validate)


def _smib(config: Dict[str, Any], validate: bool) -> Scenario:
    parameters = config.get("parameters", {})
    if tuple(parameters) != SMIB_PARAMETERS:
        raise DimensionMismatch(
            f"smib parameters must be {', '.join(SMIB_PARAMETERS)} in that order"
        )
    for param in SMIB_PARAMETERS[1:]:
        if parameters[param] <= 0:
            raise InvalidParameter(f"{param} must be positive")
    delta, omega = states = sympy.symbols("delta omega")
    params = sympy.symbols(" ".join(SMIB_PARAMETERS))
    Pm, M = params[0], params[1]
    damping = config.get("constants", {}).get("D", 0.5)
    models = []
    for topology in TOPOLOGIES:
        coupling = config[topology].get("ev_x", 1.0)
        models.append(
            ParametricModel(
                f"{config['name']} {topology}",
                states,
                params,
                [omega, (Pm - coupling * sympy.sin(delta) - damping * omega) / M],
            )
        )
    namespace = {str(s): s for s in states + params}
    namespace.update(config.get("constants", {}))
    return _finish(
        config, models, states, params, namespace, SMIB_PARAMETERS[1:], validate
    )


def multimachine_model(dataset: Mapping[str, Any], validate: bool = True) -> Scenario:
    """
    Classical machines behind a network reduced to their internal buses:

        M_i d(omega_i)/dt = Pm_i - Pe_i - D_i omega_i,  D_i = 4 M_i,
        Pe_i = sum_j E_i E_j (G_ij cos(d_ij) + B_ij sin(d_ij)).

    Angles are measured relative to the last machine, so the states are
    delta_1 .. delta_{m-1} followed by omega_1 .. omega_m. Constraint
    expressions may use every delta_i, with delta_m meaning zero.
    """
    config = dict(dataset)
    config.setdefault("kind", "multimachine")
    config.setdefault("name", "multimachine")
    machines = config.get("machines", {})
    inertia = list(machines.get("M", ()))
    voltage = list(machines.get("E", ()))
    m = len(inertia)
    if m < 2 or len(voltage) != m:
        raise DimensionMismatch("M and E must list the same machines, at least two")
    if any(value <= 0 for value in inertia):
        raise InvalidParameter("machine inertias must be positive")
    ratio = machines.get("damping_ratio", DAMPING_RATIO)
    angles = sympy.symbols(f"delta1:{m}")
    speeds = sympy.symbols(f"omega1:{m + 1}")
    states = tuple(angles) + tuple(speeds)
    absolute: List[Any] = list(angles) + [sympy.Integer(0)]
    param_names = list(config.get("parameters", {}))
    expected = [f"Pm{i + 1}" for i in range(m)]
    if any(name not in param_names for name in expected):
        raise DimensionMismatch(f"parameters must include {', '.join(expected)}")
    params = sympy.symbols(" ".join(param_names), seq=True)
    by_name = dict(zip(param_names, params))
    models = []
    for topology in TOPOLOGIES:
        network = config.get(topology, {})
        G, B = network.get("G"), network.get("B")
        if G is None or B is None:
            raise DimensionMismatch(f"[{topology}] needs both G and B")
        if len(G) != m or len(B) != m or any(
            len(row) != m for row in list(G) + list(B)
        ):
            raise DimensionMismatch(f"[{topology}] G and B must be {m} x {m}")
        rhs: List[Any] = [speeds[i] - speeds[m - 1] for i in range(m - 1)]
        for i in range(m):
            electrical = sum(
                voltage[i]
                * voltage[j]
                * (
                    G[i][j] * sympy.cos(absolute[i] - absolute[j])
                    + B[i][j] * sympy.sin(absolute[i] - absolute[j])
                )
                for j in range(m)
            )
            rhs.append(
                (by_name[f"Pm{i + 1}"] - electrical) / inertia[i] - ratio * speeds[i]
            )
        models.append(
            ParametricModel(f"{config['name']} {topology}", states, params, rhs)
        )
    namespace: Dict[str, Any] = {str(s): s for s in states + tuple(params)}
    namespace[f"delta{m}"] = sympy.Integer(0)
    namespace.update(config.get("constants", {}))
    return _finish(
        config,
        models,
        states,
        params,
        namespace,
        config.get("positive", ()),
        validate,
    )


def symbolic_model(config: Mapping[str, Any], validate: bool = True) -> Scenario:
    """
    A model given by one expression per state for each topology, written
    over the state names, the parameter names and the constants.
    """
    config = dict(config)
    config.setdefault("kind", "symbolic")
    config.setdefault("name", "symbolic")
    state_names = list(config.get("states", ()))
    if not state_names:
        raise ScenarioParseError("a symbolic scenario lists its states")
    states = sympy.symbols(" ".join(state_names), seq=True)
    param_names = list(config.get("parameters", {}))
    params = sympy.symbols(" ".join(param_names), seq=True) if param_names else ()
    namespace: Dict[str, Any] = {str(s): s for s in tuple(states) + tuple(params)}
    namespace.update(config.get("constants", {}))
    models = []
    for topology in TOPOLOGIES:
        equations = config.get(topology, {})
        missing = [name for name in state_names if name not in equations]
        if missing:
            raise DimensionMismatch(
                f"[{topology}] has no equation for {', '.join(missing)}"
            )
        rhs = [
            _parse(equations[name], namespace, f"[{topology}] {name}")
            for name in state_names
        ]
        models.append(
            ParametricModel(f"{config['name']} {topology}", states, params, rhs)
        )
    return _finish(
        config,
        models,
        states,
        params,
        namespace,
        config.get("positive", ()),
        validate,
    )


BUILDERS = {
    "smib": _smib,
    "multimachine": multimachine_model,
    "symbolic": symbolic_model,
}


def build_scenario(config: Mapping[str, Any], validate: bool = True) -> Scenario:
    """Build the scenario described by a dictionary."""
    kind = config.get("kind", "symbolic")
    if kind not in BUILDERS:
        raise ScenarioParseError(f"unknown scenario kind {kind!r}")
    if "parameters" not in config:
        raise ScenarioParseError("a scenario needs a [parameters] section")
    return BUILDERS[kind](dict(config), validate)
