"""
First order sensitivity of the critical clearing time to each parameter.

The fault trajectory from the pre-fault SEP is differentiated up to the
critical clearing time and, for categories 2 and 3, the post-fault trajectory
up to its anchor. The condition that pins the critical trajectory then fixes
dt_cr/dp:

- category 1, the clearing state stays on the combined boundary
  H_comb(x_cr) = 0;
- category 2, the post-fault trajectory keeps grazing the boundary, so
  H_post = 0 and dH_post/dt = 0 at its end point;
- category 3, the post-fault end point stays on the stable manifold of the
  controlling UEP, whose tangent space is normal to the left eigenvector w of
  the unstable eigenvalue.
"""
from typing import Any, Dict, Iterable, List, NamedTuple, Optional, Tuple

import numpy as np
import scipy.linalg
import tabulate
from logzero import logger

from .critical_result import CriticalResult
from .exception import (
    EigenFailure,
    NonTransversal,
    SanityCheckFailure,
    SingularJacobian,
    SolverError,
)
from .integrator import Augmented, integrate
from .models import ParametricModel, Scenario
from .models.equilibrium import MAX_CONDITION, ZERO_REAL_PART
from .utils import jsonable_vector, round_significant

__all__ = (
    "CriticalTrajectories",
    "SensIngredients",
    "SensitivityEntry",
    "SensitivityReport",
    "category1_sensitivity",
    "category2_sensitivity",
    "category3_sensitivity",
    "compute_ingredients",
    "critical_trajectories",
    "cuep_sensitivity",
    "sensitivity_report",
    "sep_sensitivity",
    "unstable_left_eigenvector",
)

TRANSVERSALITY = 1e-10
ANCHOR_RESIDUAL = 1e-4


class SensIngredients(NamedTuple):
    """
    The matrices of the sensitivity formulas for one scalar parameter.

    M1, M3: fault flow derivatives at t_cr with respect to the initial state
    and to p; M2: fault field at x_cr; M4: pre-fault SEP sensitivity; M5, M6:
    gradient of H_comb at x_cr and minus its p-derivative. O1, O3: post-fault
    flow derivatives at T; O2: post-fault field at x_T; O4, O5: gradients of
    (H_post, dH_post/dt) at x_T and minus their p-derivatives; O6: CUEP
    sensitivity; w: unit left eigenvector of the unstable eigenvalue.
    """

    M1: np.ndarray
    M2: np.ndarray
    M3: np.ndarray
    M4: np.ndarray
    M5: np.ndarray
    M6: float
    O1: Optional[np.ndarray] = None
    O2: Optional[np.ndarray] = None
    O3: Optional[np.ndarray] = None
    O4: Optional[np.ndarray] = None
    O5: Optional[np.ndarray] = None
    O6: Optional[np.ndarray] = None
    w: Optional[np.ndarray] = None

    @property
    def clearing_state_sensitivity(self) -> np.ndarray:
        """M1 M4 + M3, the change of x_cr at fixed clearing time."""
        return self.M1 @ self.M4 + self.M3

    def to_jsonable(self) -> Dict[str, Any]:
        d: Dict[str, Any] = {}
        for key, value in self._asdict().items():
            if value is None:
                d[key] = None
            elif np.ndim(value) == 0:
                d[key] = round_significant(float(value))
            else:
                d[key] = np.vectorize(round_significant)(np.asarray(value)).tolist()
        return d


def _equilibrium_sensitivity(
    model: ParametricModel, x: np.ndarray, p: np.ndarray
) -> np.ndarray:
    jac = model.jac_x(x, p)
    if np.linalg.cond(jac) > MAX_CONDITION:
        raise SingularJacobian(f"{model.name}: singular Jacobian at {x}")
    return -np.linalg.solve(jac, model.jac_p(x, p))


def sep_sensitivity(
    model: ParametricModel,
    sep: np.ndarray,
    p0: np.ndarray,
    param_index: Optional[int] = None,
) -> np.ndarray:
    """
    Return dx_s/dp = -(df/dx)^-1 df/dp at the equilibrium, for one parameter
    or as an n x n_p matrix.
    """
    sens = _equilibrium_sensitivity(model, np.asarray(sep, dtype=float), p0)
    return sens if param_index is None else sens[:, param_index]


def cuep_sensitivity(
    model_post: ParametricModel,
    cuep: np.ndarray,
    p0: np.ndarray,
    param_index: Optional[int] = None,
) -> np.ndarray:
    """Return the sensitivity of the controlling UEP."""
    return sep_sensitivity(model_post, cuep, p0, param_index)


def unstable_left_eigenvector(
    model: ParametricModel, x: np.ndarray, p: np.ndarray
) -> np.ndarray:
    """
    Return the unit left eigenvector of the only eigenvalue with positive real
    part, signed so that its first nonzero entry is positive.
    """
    try:
        eigenvalues, left = scipy.linalg.eig(model.jac_x(x, p), left=True, right=False)
    except (np.linalg.LinAlgError, ValueError) as e:
        raise EigenFailure(str(e)) from e
    unstable = np.flatnonzero(eigenvalues.real > ZERO_REAL_PART)
    if len(unstable) != 1 or abs(eigenvalues[unstable[0]].imag) > ZERO_REAL_PART:
        raise EigenFailure(f"no unique real unstable eigenvalue at {x}")
    w = np.real(left[:, unstable[0]])
    w = w / np.linalg.norm(w)
    first = np.flatnonzero(np.abs(w) > 1e-12)[0]
    return w if w[first] > 0 else -w


def _check_denominator(value: float, what: str) -> None:
    if not abs(value) > TRANSVERSALITY:
        raise NonTransversal(f"{what} is {value:.3g}")


def category1_sensitivity(ing: SensIngredients) -> float:
    """dt_cr/dp = (M6 - M5 (M1 M4 + M3)) / (M5 M2)."""
    denominator = float(ing.M5 @ ing.M2)
    _check_denominator(denominator, "the rate of change of H_comb at clearing")
    return float(ing.M6 - ing.M5 @ ing.clearing_state_sensitivity) / denominator


def _category2_system(ing: SensIngredients) -> Tuple[np.ndarray, np.ndarray]:
    if ing.O1 is None or ing.O2 is None or ing.O3 is None:
        raise SolverError("post-fault ingredients are missing")
    if ing.O4 is None or ing.O5 is None:
        raise SolverError("graze ingredients are missing")
    matrix = ing.O4 @ np.column_stack((ing.O1 @ ing.M2, ing.O2))
    rhs = ing.O5 - ing.O4 @ (ing.O1 @ ing.clearing_state_sensitivity + ing.O3)
    return matrix, rhs


def category2_sensitivity(ing: SensIngredients) -> Tuple[float, float]:
    """
    Solve the two conditions of the grazing end point for the changes of the
    clearing time and of the post-fault time to the graze.
    """
    matrix, rhs = _category2_system(ing)
    _check_denominator(float(np.linalg.det(matrix)), "the graze determinant")
    dt_cl, dt_end = np.linalg.solve(matrix, rhs)
    return float(dt_cl), float(dt_end)


def _category3_denominator(ing: SensIngredients) -> float:
    if ing.O1 is None or ing.O3 is None or ing.O6 is None or ing.w is None:
        raise SolverError("controlling UEP ingredients are missing")
    return float(ing.w @ ing.O1 @ ing.M2)


def category3_sensitivity(ing: SensIngredients) -> float:
    """dt_cr/dp = w (O6 - O3 - O1 (M1 M4 + M3)) / (w O1 M2)."""
    denominator = _category3_denominator(ing)
    _check_denominator(denominator, "the unstable component of the clearing flow")
    assert ing.w is not None and ing.O1 is not None
    numerator = ing.w @ (ing.O6 - ing.O3 - ing.O1 @ ing.clearing_state_sensitivity)
    return float(numerator) / denominator


class CriticalTrajectories(NamedTuple):
    """Flow derivatives at t_cr on the fault trajectory and at T on the
    post-fault trajectory, for every parameter at once."""

    fault: Augmented
    post: Optional[Augmented]


def _flow(
    model: ParametricModel, x0: np.ndarray, p: np.ndarray, t_end: float, step: float
) -> Augmented:
    if t_end <= 0:
        return (
            np.array(x0, dtype=float),
            np.eye(model.dim),
            np.zeros((model.dim, model.n_params)),
        )
    traj = integrate(model, None, x0, p, t_end, step=step, detect_events=False)
    assert traj.phi_x is not None and traj.phi_p is not None
    return traj.final_state, traj.phi_x[-1], traj.phi_p[-1]


def critical_trajectories(
    scenario: Scenario, result: CriticalResult
) -> CriticalTrajectories:
    """Integrate the critical fault and post-fault trajectories with their
    sensitivities."""
    fault = _flow(scenario.fault, result.x_pre, result.p, result.t_cr, result.step)
    post = None
    if result.category != 1 and result.T is not None:
        post = _flow(scenario.post, fault[0], result.p, result.T, result.step)
    return CriticalTrajectories(fault, post)


def compute_ingredients(
    scenario: Scenario,
    p0: np.ndarray,
    result: CriticalResult,
    param_index: int,
    trajectories: Optional[CriticalTrajectories] = None,
) -> SensIngredients:
    """Assemble the matrices the category of the result needs."""
    p0 = np.asarray(p0, dtype=float)
    if trajectories is None:
        trajectories = critical_trajectories(scenario, result)
    x_cr, M1, fault_phi_p = trajectories.fault
    h_comb = scenario.h_comb
    ingredients = SensIngredients(
        M1=M1,
        M2=scenario.fault.f(x_cr, p0),
        M3=fault_phi_p[:, param_index],
        M4=sep_sensitivity(scenario.pre, result.x_pre, p0, param_index),
        M5=h_comb.grad_x(x_cr, p0),
        M6=-float(h_comb.grad_p(x_cr, p0)[param_index]),
    )
    if result.category == 1:
        return ingredients
    if trajectories.post is None:
        raise SolverError("the post-fault trajectory is missing")
    x_T, O1, post_phi_p = trajectories.post
    ingredients = ingredients._replace(
        O1=O1, O2=scenario.post.f(x_T, p0), O3=post_phi_p[:, param_index]
    )
    if result.category == 2:
        h_post, post = scenario.h_post, scenario.post
        value, hdot = h_post.H(x_T, p0), h_post.hdot(post, x_T, p0)
        if abs(value) > ANCHOR_RESIDUAL or abs(hdot) > ANCHOR_RESIDUAL:
            raise SanityCheckFailure(
                f"the graze anchor has H = {value:.3g} and dH/dt = {hdot:.3g}"
            )
        hdot_x, hdot_p = h_post.hdot_gradients(post, x_T, p0)
        return ingredients._replace(
            O4=np.vstack((h_post.grad_x(x_T, p0), hdot_x)),
            O5=-np.array([h_post.grad_p(x_T, p0)[param_index], hdot_p[param_index]]),
        )
    if result.cuep is None:
        raise SolverError("a category 3 result needs its controlling UEP")
    return ingredients._replace(
        O6=cuep_sensitivity(scenario.post, result.cuep.x, p0, param_index),
        w=unstable_left_eigenvector(scenario.post, result.cuep.x, p0),
    )


def evaluate(ing: SensIngredients, category: int) -> Tuple[float, Optional[float]]:
    """Return dt_cr/dp and, for category 2, the change of the time to the
    graze."""
    if category == 1:
        return category1_sensitivity(ing), None
    if category == 2:
        return category2_sensitivity(ing)
    return category3_sensitivity(ing), None


def denominator(ing: SensIngredients, category: int) -> float:
    """The magnitude whose vanishing makes the formula break down."""
    if category == 1:
        return abs(float(ing.M5 @ ing.M2))
    if category == 2:
        return abs(float(np.linalg.det(_category2_system(ing)[0])))
    return abs(_category3_denominator(ing))


class SensitivityEntry(NamedTuple):
    param: str
    category: int
    dtcr_dp: Optional[float]
    dtend_dp: Optional[float] = None
    denominator: Optional[float] = None
    ingredients: Optional[SensIngredients] = None
    error: Optional[str] = None

    def to_jsonable(self) -> Dict[str, Any]:
        return {
            "param": self.param,
            "category": self.category,
            "dtcr_dp": round_significant(self.dtcr_dp),
            "dtend_dp": round_significant(self.dtend_dp),
            "denominator": round_significant(self.denominator),
            "error": self.error,
        }


class SensitivityReport:
    """The sensitivities of one critical clearing time to a set of
    parameters."""

    def __init__(self, result: CriticalResult, entries: Iterable[SensitivityEntry]):
        self.result = result
        self.entries: List[SensitivityEntry] = list(entries)

    @property
    def category(self) -> int:
        return self.result.category

    def __getitem__(self, param: str) -> SensitivityEntry:
        for entry in self.entries:
            if entry.param == param:
                return entry
        raise KeyError(param)

    def __iter__(self):
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def table(self) -> str:
        rows = [
            (
                e.param,
                "" if e.dtcr_dp is None else f"{e.dtcr_dp:.6g}",
                "" if e.denominator is None else f"{e.denominator:.3g}",
                e.error or "",
            )
            for e in self.entries
        ]
        return tabulate.tabulate(
            rows,
            headers=("Parameter", "dt_cr/dp", "Denominator", "Error"),
            colalign=("left", "right", "right", "left"),
        )

    def to_jsonable(self) -> Dict[str, Any]:
        return {
            "result": self.result.to_jsonable(),
            "entries": [e.to_jsonable() for e in self.entries],
            "x_cr": jsonable_vector(self.result.x_cr),
        }


def sensitivity_report(
    scenario: Scenario,
    p0: np.ndarray,
    result: CriticalResult,
    params: Optional[Iterable[str]] = None,
) -> SensitivityReport:
    """
    Evaluate the category formula for every named parameter, sharing the
    critical trajectories between them. A parameter whose formula breaks down
    is reported with the error instead of a value.
    """
    names = list(scenario.param_names if params is None else params)
    trajectories = critical_trajectories(scenario, result)
    entries: List[SensitivityEntry] = []
    for name in names:
        index = scenario.param_index(name)
        try:
            ing = compute_ingredients(scenario, p0, result, index, trajectories)
            dtcr_dp, dtend_dp = evaluate(ing, result.category)
        except SolverError as e:
            logger.warning("no sensitivity to %s: %s", name, e)
            entries.append(
                SensitivityEntry(name, result.category, None, error=type(e).__name__)
            )
            continue
        entries.append(
            SensitivityEntry(
                name,
                result.category,
                dtcr_dp,
                dtend_dp,
                denominator(ing, result.category),
                ing,
            )
        )
    return SensitivityReport(result, entries)
