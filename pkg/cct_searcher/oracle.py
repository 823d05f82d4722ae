"""
Brute force references: finite differences of the critical clearing time and
the closed form of the single machine fault trajectory.
"""
from typing import NamedTuple, Optional, Sequence

import numpy as np
from logzero import logger

from .cct_searcher import find_cct
from .exception import CategoryChanged, InvalidParameter
from .models import Scenario

__all__ = (
    "FaultOnClosedForm",
    "FdSpec",
    "closed_form_faulton",
    "fd_cct_sensitivity",
    "fd_refinement_gap",
)


class FdSpec(NamedTuple):
    """Relative perturbation and bisection tolerance of the finite difference
    runs. Only central differences are supported."""

    delta: float = 1e-3
    cct_tol: float = 1e-4
    scheme: str = "central"

    def check(self) -> None:
        if not self.delta > 0:
            raise InvalidParameter("the perturbation must be positive")
        if not 0 < self.cct_tol < 0.01:
            raise InvalidParameter("the oracle tolerance must be below 0.01 s")
        if self.scheme != "central":
            raise InvalidParameter(f"unknown difference scheme {self.scheme!r}")

    def perturbation(self, value: float) -> float:
        return self.delta * max(1.0, abs(value))


def fd_cct_sensitivity(
    scenario: Scenario,
    p0: Optional[np.ndarray],
    param_index: int,
    spec: FdSpec = FdSpec(),
    **search_kwargs,
) -> float:
    """
    Return (t_cr(p0 + dp) - t_cr(p0 - dp)) / (2 dp) for the parameter, with
    both searches run at the oracle tolerance.
    """
    spec.check()
    search_kwargs.pop("tol", None)
    p0 = scenario.p0.copy() if p0 is None else np.array(p0, dtype=float)
    dp = spec.perturbation(p0[param_index])
    results = []
    for sign in (1, -1):
        p = p0.copy()
        p[param_index] += sign * dp
        results.append(find_cct(scenario, p, tol=spec.cct_tol, **search_kwargs))
    plus, minus = results
    if plus.category != minus.category:
        raise CategoryChanged(
            f"category {minus.category} below and {plus.category} above "
            f"{scenario.param_names[param_index]} = {p0[param_index]:g}"
        )
    logger.debug(
        "finite difference over %s: t_cr %s and %s",
        scenario.param_names[param_index],
        minus.t_cr,
        plus.t_cr,
    )
    return (plus.t_cr - minus.t_cr) / (2 * dp)


def fd_refinement_gap(
    scenario: Scenario,
    p0: Optional[np.ndarray],
    param_index: int,
    spec: FdSpec = FdSpec(),
    **search_kwargs,
) -> float:
    """Return how much the finite difference moves when the perturbation is
    halved."""
    coarse = fd_cct_sensitivity(scenario, p0, param_index, spec, **search_kwargs)
    fine = fd_cct_sensitivity(
        scenario, p0, param_index, spec._replace(delta=spec.delta / 2), **search_kwargs
    )
    return abs(coarse - fine)


class FaultOnClosedForm(NamedTuple):
    delta: float
    omega: float
    ddelta_dPm: float
    ddelta_dM: float
    domega_dPm: float
    domega_dM: float


def closed_form_faulton(
    params: Sequence[float],
    t: float,
    delta0: Optional[float] = None,
    damping: float = 0.5,
) -> FaultOnClosedForm:
    """
    The single machine trajectory while the infinite bus is shorted, started
    from (delta0, 0), with the partials taken at fixed delta0. By default
    delta0 is the pre-fault equilibrium angle arcsin(Pm).

    >>> round(closed_form_faulton([0.6, 0.25], 0.5).omega, 7)
    0.7585447
    """
    Pm, M = float(params[0]), float(params[1])
    D = float(damping)
    if M <= 0 or D <= 0:
        raise InvalidParameter("M and D must be positive")
    if delta0 is None:
        delta0 = float(np.arcsin(Pm))
    decay = np.exp(-D * t / M)
    rise = 1 - decay
    return FaultOnClosedForm(
        delta=delta0 + Pm * t / D - Pm * M / D ** 2 * rise,
        omega=Pm / D * rise,
        ddelta_dPm=t / D - M / D ** 2 * rise,
        ddelta_dM=-Pm / D ** 2 * rise + Pm * t / (D * M) * decay,
        domega_dPm=rise / D,
        domega_dM=-Pm * t / M ** 2 * decay,
    )
