"""
A fault scenario: pre-fault, fault-on and post-fault models with their
constraint sets, a named parameter vector, and the scenario file format.
"""
import configparser
import itertools
import os
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from logzero import logger

from ..exception import (
    DimensionMismatch,
    InvalidParameter,
    NoConvergence,
    ScenarioNotFound,
    ScenarioParseError,
    ScenarioRejected,
    SingularJacobian,
)
from .boundary import BOUNDARY_TOLERANCE
from .equilibrium import find_equilibrium
from .parametric import ConstraintSet, ParametricModel

__all__ = (
    "Scenario",
    "load_scenario",
    "read_scenario_file",
    "shipped_scenarios",
    "validate_feasibility_boundary",
)

SCENARIO_DIRECTORY = os.path.join(
    os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "scenarios"
)
SCENARIO_SUFFIX = ".ini"


class Scenario:
    """
    The three topologies of a fault together with the constraint sets active
    during the fault and after clearing.
    """

    def __init__(
        self,
        name: str,
        pre: ParametricModel,
        fault: ParametricModel,
        post: ParametricModel,
        h_fault: ConstraintSet,
        h_post: ConstraintSet,
        param_names: Sequence[str],
        p0: Sequence[float],
        t_max: float = 10.0,
        sep_guess: Optional[Sequence[float]] = None,
        positive_parameters: Iterable[str] = (),
        window: Optional[Sequence[Sequence[float]]] = None,
        config: Optional[Dict[str, Any]] = None,
    ):
        self.name = name
        self.pre = pre
        self.fault = fault
        self.post = post
        self.h_fault = h_fault
        self.h_post = h_post
        self._h_comb: Optional[ConstraintSet] = None
        self.param_names: Tuple[str, ...] = tuple(param_names)
        self.p0 = np.array(p0, dtype=float)
        self.t_max = float(t_max)
        dims = {pre.dim, fault.dim, post.dim, h_fault.dim, h_post.dim}
        if len(dims) != 1:
            raise DimensionMismatch(f"{name}: topologies disagree on the state size")
        n_params = {
            pre.n_params,
            fault.n_params,
            post.n_params,
            len(self.param_names),
            len(self.p0),
        }
        if len(n_params) != 1:
            raise DimensionMismatch(f"{name}: parameter vectors disagree in size")
        if sep_guess is None:
            self.sep_guess = np.zeros(pre.dim)
        else:
            self.sep_guess = np.array(sep_guess, dtype=float)
        if self.sep_guess.shape != (pre.dim,):
            raise DimensionMismatch(f"{name}: sep_guess has the wrong size")
        if self.t_max <= 0:
            raise InvalidParameter(f"{name}: t_max must be positive")
        self.positive_parameters = tuple(positive_parameters)
        for param in self.positive_parameters:
            self.param_index(param)
        self.window = None if window is None else np.array(window, dtype=float)
        self.config = config
        self.check_parameters(self.p0)

    @property
    def dim(self) -> int:
        return self.pre.dim

    @property
    def n_params(self) -> int:
        return len(self.param_names)

    @property
    def h_comb(self) -> ConstraintSet:
        """The union of the fault-on and post-fault constraints."""
        if self._h_comb is None:
            self._h_comb = self.h_fault.combined(self.h_post)
        return self._h_comb

    def param_index(self, name: str) -> int:
        try:
            return self.param_names.index(name)
        except ValueError:
            raise InvalidParameter(
                f"{self.name} has no parameter {name!r}; "
                f"choose from {', '.join(self.param_names)}"
            ) from None

    def check_parameters(self, p: np.ndarray) -> None:
        """Raise InvalidParameter if p is not a usable parameter vector."""
        if len(p) != self.n_params:
            raise InvalidParameter(f"expected {self.n_params} parameters")
        if not np.all(np.isfinite(p)):
            raise InvalidParameter("parameters must be finite")
        for param in self.positive_parameters:
            if p[self.param_index(param)] <= 0:
                raise InvalidParameter(f"{param} must be positive")

    def parameters(self, overrides: Optional[Mapping[str, float]] = None) -> np.ndarray:
        """Return a copy of the base vector with the given entries replaced."""
        p = self.p0.copy()
        for name, value in (overrides or {}).items():
            p[self.param_index(name)] = float(value)
        self.check_parameters(p)
        return p

    def with_parameters(self, overrides: Mapping[str, float]) -> "Scenario":
        """Return the scenario rebuilt around a new base parameter vector."""
        p = self.parameters(overrides)
        config = self.to_jsonable()
        config["parameters"] = dict(zip(self.param_names, (float(v) for v in p)))
        return self.from_dict(config)

    def validate(self, p: Optional[np.ndarray] = None) -> None:
        validate_feasibility_boundary(self, self.p0 if p is None else p)

    def to_jsonable(self) -> Dict[str, Any]:
        """Return the dictionary the scenario was built from."""
        if self.config is None:
            raise ScenarioParseError(f"{self.name} was not built from a description")
        return _copy_config(self.config)

    @classmethod
    def from_dict(cls, config: Mapping[str, Any], validate: bool = True) -> "Scenario":
        # pylint: disable=import-outside-toplevel
        from .machines import build_scenario

        return build_scenario(config, validate=validate)

    def __reduce__(self):
        return (_rebuild, (self.to_jsonable(),))

    def __repr__(self) -> str:
        params = ", ".join(f"{n}={v:g}" for n, v in zip(self.param_names, self.p0))
        return f"Scenario({self.name!r}, {params})"


def _rebuild(config: Dict[str, Any]) -> Scenario:
    return Scenario.from_dict(config, validate=False)


def _copy_config(config: Mapping[str, Any]) -> Dict[str, Any]:
    copied: Dict[str, Any] = {}
    for key, value in config.items():
        if isinstance(value, Mapping):
            copied[key] = _copy_config(value)
        elif isinstance(value, (list, tuple)):
            copied[key] = [
                list(v) if isinstance(v, (list, tuple)) else v for v in value
            ]
        else:
            copied[key] = value
    return copied


def _boundary_seeds(
    h_single: ConstraintSet,
    p: np.ndarray,
    center: np.ndarray,
    radius: float,
    points: int,
) -> List[np.ndarray]:
    """Project a grid of points around center onto the zero set of h_single."""
    axis = np.linspace(-radius, radius, points)
    seeds: List[np.ndarray] = []
    for offset in itertools.product(axis, repeat=len(center)):
        x = center + np.array(offset)
        for _ in range(20):
            value = h_single.H(x, p)
            grad = h_single.grad_x(x, p)
            norm = float(grad @ grad)
            if abs(value) <= 1e-12 or norm == 0.0 or not np.isfinite(value):
                break
            x = x - value * grad / norm
        if abs(h_single.H(x, p)) > BOUNDARY_TOLERANCE:
            continue
        if all(np.linalg.norm(x - s) > 1e-6 for s in seeds):
            seeds.append(x)
    return seeds


def validate_feasibility_boundary(
    scenario: Scenario,
    p: np.ndarray,
    radius: Optional[float] = None,
    points_per_axis: Optional[int] = None,
) -> None:
    """
    Check that no post-fault equilibrium lies on the feasibility boundary.

    Seeds are spread over every constraint surface h_k = 0 near the SEP guess
    and refined with Newton's method on the post-fault field; an equilibrium
    found on h_k = 0 rejects the scenario.

    The seeds come from a cube of half width radius around the SEP guess
    with points_per_axis points along each state, so an equilibrium outside
    the cube, or between seeds of a coarse grid, can go unnoticed. Both
    default to the `boundary_radius` and `boundary_points` of the scenario
    file, or to 3 and to 9 points (3 points above two states).
    """
    config = scenario.config or {}
    if radius is None:
        radius = float(config.get("boundary_radius", 3.0))
    if points_per_axis is None:
        points_per_axis = int(
            config.get("boundary_points", 9 if scenario.dim <= 2 else 3)
        )
    if points_per_axis < 1:
        raise InvalidParameter("boundary_points must be positive")
    post, h_post = scenario.post, scenario.h_post
    for name, h in zip(h_post.names, h_post.constraints):
        single = ConstraintSet(h_post.states, h_post.params, [h], [name])
        for seed in _boundary_seeds(
            single, p, scenario.sep_guess, radius, points_per_axis
        ):
            try:
                equilibrium = find_equilibrium(post, p, seed)
            except (NoConvergence, SingularJacobian):
                continue
            if abs(single.H(equilibrium.x, p)) <= BOUNDARY_TOLERANCE:
                raise ScenarioRejected(
                    f"{scenario.name}: the post-fault equilibrium at "
                    f"{equilibrium.x} lies on the boundary {name} = 0"
                )
    logger.debug("%s: no equilibrium on the feasibility boundary", scenario.name)


def shipped_scenarios() -> List[str]:
    """Return the names of the scenarios shipped with the package."""
    return sorted(
        filename[: -len(SCENARIO_SUFFIX)]
        for filename in os.listdir(SCENARIO_DIRECTORY)
        if filename.endswith(SCENARIO_SUFFIX)
    )


def _vector(text: str) -> List[float]:
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError as e:
        raise ScenarioParseError(f"bad number in {text!r}") from e


def _matrix(text: str) -> List[List[float]]:
    return [_vector(row) for row in text.split(";") if row.strip()]


def _float(section: str, key: str, text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ScenarioParseError(
            f"[{section}] {key}: {text!r} is not a number"
        ) from None


def read_scenario_file(path: str) -> Dict[str, Any]:
    """Parse a scenario file into the dictionary that build_scenario reads."""
    parser = configparser.ConfigParser(
        inline_comment_prefixes=("#",), interpolation=None
    )
    parser.optionxform = str  # type: ignore[assignment]
    try:
        with open(path, encoding="utf-8") as f:
            parser.read_file(f)
    except configparser.Error as e:
        raise ScenarioParseError(f"{path}: {e}") from e
    if not parser.has_section("scenario"):
        raise ScenarioParseError(f"{path}: missing [scenario] section")
    header = parser["scenario"]
    kind = header.get("kind", "symbolic")
    config: Dict[str, Any] = {
        "name": header.get(
            "name", os.path.splitext(os.path.basename(path))[0]
        ),
        "kind": kind,
        "t_max": _float("scenario", "t_max", header.get("t_max", "10")),
    }
    if "sep_guess" in header:
        config["sep_guess"] = _vector(header["sep_guess"])
    if "window" in header:
        config["window"] = _matrix(header["window"])
    if "boundary_radius" in header:
        config["boundary_radius"] = _float(
            "scenario", "boundary_radius", header["boundary_radius"]
        )
    if "boundary_points" in header:
        config["boundary_points"] = int(
            _float("scenario", "boundary_points", header["boundary_points"])
        )
    if "states" in header:
        config["states"] = header["states"].replace(",", " ").split()
    if "positive" in header:
        config["positive"] = header["positive"].replace(",", " ").split()
    for section in ("parameters", "constants"):
        if parser.has_section(section):
            config[section] = {
                key: _float(section, key, value)
                for key, value in parser[section].items()
            }
    if parser.has_section("machines"):
        machines = parser["machines"]
        config["machines"] = {
            key: _vector(value) if key in ("M", "E") else _float("machines", key, value)
            for key, value in machines.items()
        }
    for section in ("pre", "fault", "post"):
        if not parser.has_section(section):
            raise ScenarioParseError(f"{path}: missing [{section}] section")
        items = dict(parser[section].items())
        if kind == "multimachine":
            config[section] = {key: _matrix(value) for key, value in items.items()}
        elif kind == "smib":
            config[section] = {
                key: _float(section, key, value) for key, value in items.items()
            }
        else:
            config[section] = items
    for section in ("constraints", "constraints.fault", "constraints.post"):
        if parser.has_section(section):
            config[section] = dict(parser[section].items())
    return config


def load_scenario(
    source: str,
    overrides: Optional[Mapping[str, float]] = None,
    validate: bool = True,
) -> Scenario:
    """
    Load a scenario from a file path or by the name of a shipped scenario,
    replacing parameter values by the overrides.
    """
    # pylint: disable=import-outside-toplevel
    from .machines import build_scenario

    if os.path.isfile(source):
        path = source
    else:
        path = os.path.join(SCENARIO_DIRECTORY, source + SCENARIO_SUFFIX)
        if not os.path.isfile(path):
            raise ScenarioNotFound(f"scenario not found: {source}")
    config = read_scenario_file(path)
    if overrides:
        params = config.setdefault("parameters", {})
        for name, value in overrides.items():
            if name not in params:
                raise InvalidParameter(f"{config['name']} has no parameter {name!r}")
            params[name] = float(value)
    logger.debug("loaded scenario %s from %s", config["name"], path)
    return build_scenario(config, validate=validate)
