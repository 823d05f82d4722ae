"""
Points of the feasibility boundary H = 0 labelled by how the flow meets the
boundary there.
"""
from typing import NamedTuple, Optional

import numpy as np
from typing_extensions import Literal

from ..exception import NotOnBoundary
from .parametric import ConstraintSet, ParametricModel

__all__ = ("PseudoEpClass", "classify_boundary_point", "BOUNDARY_TOLERANCE")

BOUNDARY_TOLERANCE = 1e-8

BoundaryLabel = Literal["stable", "unstable", "semi-saddle", "bad-set"]


class PseudoEpClass(NamedTuple):
    point: np.ndarray
    kind: BoundaryLabel
    hdot: float
    hddot: Optional[float] = None


def classify_boundary_point(
    h: ConstraintSet,
    model: ParametricModel,
    x: np.ndarray,
    p: np.ndarray,
    tol: float = BOUNDARY_TOLERANCE,
) -> PseudoEpClass:
    """
    Label a point of the boundary H = 0.

    The field points at the boundary where dH/dt < 0 (a stable pseudo
    equilibrium of the transformed system) and away from it where dH/dt > 0.
    Where dH/dt vanishes the point is a semi-saddle if the gradient of H and
    the second derivative of H along the flow are both nonzero, and part of
    the bad set otherwise.
    """
    x = np.asarray(x, dtype=float)
    value = h.H(x, p)
    if abs(value) > tol:
        raise NotOnBoundary(f"H = {value:.3g} at {x}")
    hdot = h.hdot(model, x, p)
    if hdot < -tol:
        return PseudoEpClass(x, "stable", hdot)
    if hdot > tol:
        return PseudoEpClass(x, "unstable", hdot)
    hddot = h.hddot(model, x, p)
    if abs(hddot) > tol and np.linalg.norm(h.grad_x(x, p)) > tol:
        return PseudoEpClass(x, "semi-saddle", hdot, hddot)
    return PseudoEpClass(x, "bad-set", hdot, hddot)
