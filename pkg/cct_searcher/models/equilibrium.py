"""
Equilibria of a parametric model: Newton refinement and classification by the
eigenvalues of the Jacobian.
"""
from enum import Enum
from typing import Any, Dict, NamedTuple, Tuple

import numpy as np
import scipy.linalg
from logzero import logger

from ..exception import EigenFailure, NoConvergence, SingularJacobian
from ..utils import jsonable_vector, round_significant
from .parametric import ParametricModel

__all__ = ("Equilibrium", "EquilibriumKind", "find_equilibrium", "classify_equilibrium")

NEWTON_TOLERANCE = 1e-10
NEWTON_MAX_ITERATIONS = 50
MAX_CONDITION = 1e12
ZERO_REAL_PART = 1e-9


class EquilibriumKind(Enum):
    SEP = "SEP"
    UEP = "UEP"
    DEGENERATE = "degenerate"


class Equilibrium(NamedTuple):
    x: np.ndarray
    kind: EquilibriumKind
    eigenvalues: Tuple[complex, ...]

    @property
    def type(self) -> int:
        """The number of eigenvalues with positive real part."""
        return sum(1 for ev in self.eigenvalues if ev.real > ZERO_REAL_PART)

    def to_jsonable(self) -> Dict[str, Any]:
        return {
            "x": jsonable_vector(self.x),
            "kind": self.kind.value,
            "type": self.type,
            "eigenvalues": [
                [round_significant(ev.real), round_significant(ev.imag)]
                for ev in self.eigenvalues
            ],
        }


def classify_equilibrium(
    model: ParametricModel, x: np.ndarray, p: np.ndarray
) -> Equilibrium:
    """Return the equilibrium x labelled by the eigenvalues of the Jacobian."""
    try:
        eigenvalues = scipy.linalg.eigvals(model.jac_x(x, p))
    except (np.linalg.LinAlgError, ValueError) as e:
        raise EigenFailure(str(e)) from e
    if not np.all(np.isfinite(eigenvalues)):
        raise EigenFailure(f"non-finite eigenvalues at {x}")
    if np.any(np.abs(eigenvalues.real) <= ZERO_REAL_PART):
        kind = EquilibriumKind.DEGENERATE
    elif np.all(eigenvalues.real < 0):
        kind = EquilibriumKind.SEP
    else:
        kind = EquilibriumKind.UEP
    return Equilibrium(
        np.array(x, dtype=float), kind, tuple(complex(ev) for ev in eigenvalues)
    )


def find_equilibrium(
    model: ParametricModel,
    p: np.ndarray,
    x_guess: np.ndarray,
    tol: float = NEWTON_TOLERANCE,
    max_iterations: int = NEWTON_MAX_ITERATIONS,
    max_condition: float = MAX_CONDITION,
) -> Equilibrium:
    """
    Refine x_guess to a zero of the field with Newton's method and classify
    it. Converged means the max-norm of the field is at most tol.
    """
    x = np.array(x_guess, dtype=float)
    p = np.asarray(p, dtype=float)
    for iteration in range(max_iterations + 1):
        fx = model.f(x, p)
        if not np.all(np.isfinite(fx)):
            break
        if np.max(np.abs(fx), initial=0.0) <= tol:
            logger.debug(
                "Newton for %s converged in %s iterations", model.name, iteration
            )
            return classify_equilibrium(model, x, p)
        if iteration == max_iterations:
            break
        jac = model.jac_x(x, p)
        if not np.all(np.isfinite(jac)) or np.linalg.cond(jac) > max_condition:
            raise SingularJacobian(f"{model.name}: singular Jacobian at {x}")
        try:
            x = x - np.linalg.solve(jac, fx)
        except np.linalg.LinAlgError as e:
            raise SingularJacobian(f"{model.name}: {e}") from e
    raise NoConvergence(
        f"{model.name}: Newton did not converge from {np.asarray(x_guess)}"
    )
