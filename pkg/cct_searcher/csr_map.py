"""
Maps of the constrained stability region of two dimensional scenarios.

Every grid cell is integrated with the post-fault field, all cells at once,
and labelled by whether its trajectory stays feasible and returns to the SEP.
The feasibility boundary is sampled by root finding along the grid lines and
every sample is classified by how the flow meets the boundary there.
"""
import csv
import json
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from logzero import logger
from scipy.optimize import brentq
from typing_extensions import Literal

from .exception import (
    DimensionUnsupported,
    NoConvergence,
    NotOnBoundary,
    SingularJacobian,
)
from .integrator import FNORM_LEVEL
from .models import (
    ConstraintSet,
    Equilibrium,
    EquilibriumKind,
    ParametricModel,
    PseudoEpClass,
    Scenario,
    classify_boundary_point,
    find_equilibrium,
)
from .utils import format_number, jsonable_vector

__all__ = ("CsrGrid", "map_csr", "CELL_LABELS")

CellLabel = Literal["inside-CSR", "infeasible-exit", "unstable"]
CELL_LABELS: Tuple[CellLabel, ...] = ("inside-CSR", "infeasible-exit", "unstable")
INSIDE, INFEASIBLE, UNSTABLE = range(3)
ROOT_TOLERANCE = 1e-14
SADDLE_TOLERANCE = 1e-10


class CsrGrid(NamedTuple):
    """Cell labels are indexed [j, i] for the cell at (xs[i], ys[j])."""

    x_range: Tuple[float, float]
    y_range: Tuple[float, float]
    resolution: Tuple[int, int]
    xs: np.ndarray
    ys: np.ndarray
    labels: np.ndarray
    boundary_samples: List[PseudoEpClass]
    semi_saddles: List[np.ndarray]
    ueps: List[Equilibrium]
    sep: np.ndarray

    def label_at(self, x: float, y: float) -> CellLabel:
        """Return the label of the grid cell nearest to (x, y)."""
        i = int(np.argmin(np.abs(self.xs - x)))
        j = int(np.argmin(np.abs(self.ys - y)))
        return CELL_LABELS[self.labels[j, i]]

    def count(self, label: CellLabel) -> int:
        return int(np.sum(self.labels == CELL_LABELS.index(label)))

    def to_jsonable(self) -> Dict[str, Any]:
        return {
            "x_range": list(self.x_range),
            "y_range": list(self.y_range),
            "resolution": list(self.resolution),
            "sep": jsonable_vector(self.sep),
            "boundary_samples": [
                {
                    "point": jsonable_vector(sample.point),
                    "class": sample.kind,
                    "hdot": float(format_number(sample.hdot)),
                }
                for sample in self.boundary_samples
            ],
            "semi_saddles": [jsonable_vector(x) for x in self.semi_saddles],
            "ueps": [uep.to_jsonable() for uep in self.ueps],
        }

    def write_csv(self, f) -> None:
        writer = csv.writer(f)
        writer.writerow(("x", "y", "label"))
        for j, y in enumerate(self.ys):
            for i, x in enumerate(self.xs):
                writer.writerow(
                    (format_number(x), format_number(y), CELL_LABELS[self.labels[j, i]])
                )

    def write_json(self, f) -> None:
        json.dump(self.to_jsonable(), f, indent=2)
        f.write("\n")


def _rk4_step(
    model: ParametricModel, p: np.ndarray, x: np.ndarray, step: float
) -> np.ndarray:
    k1 = model.f_batch(x, p)
    k2 = model.f_batch(x + step / 2 * k1, p)
    k3 = model.f_batch(x + step / 2 * k2, p)
    k4 = model.f_batch(x + step * k3, p)
    return x + step / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def _label_cells(
    model: ParametricModel,
    h: ConstraintSet,
    p: np.ndarray,
    sep: np.ndarray,
    points: np.ndarray,
    t_max: float,
    step: float,
    sep_radius: float,
    max_horizon: Optional[float] = None,
) -> np.ndarray:
    """
    Integrate all points (shape (2, K)) together with the classical fourth
    order Runge-Kutta scheme and label them.

    Cells that are feasible but not yet at the SEP after t_max are integrated
    for another t_max while they are still converging, that is the envelope
    of their distance to the SEP shrinks over the run or they are held near
    an equilibrium, until max_horizon (default eight times t_max).
    """
    if max_horizon is None:
        max_horizon = 8 * t_max
    x = points.copy()
    infeasible = np.any(h.values_batch(x, p) <= 0, axis=0)
    active = ~infeasible
    n_steps = int(np.ceil(t_max / step - 1e-9))
    elapsed = 0.0
    with np.errstate(all="ignore"):
        while np.any(active):
            index = np.flatnonzero(active)
            xa = x[:, index]
            exits = np.zeros(len(index), dtype=bool)
            early = np.zeros(len(index))
            late = np.zeros(len(index))
            for k in range(n_steps):
                xa = _rk4_step(model, p, xa, step)
                finite = np.all(np.isfinite(xa), axis=0)
                xa[:, ~finite] = np.nan
                exits |= finite & np.any(h.values_batch(xa, p) <= 0, axis=0)
                envelope = late if 2 * k >= n_steps else early
                distance = np.linalg.norm(xa - sep[:, None], axis=0)
                np.fmax(envelope, distance, out=envelope)
            x[:, index] = xa
            infeasible[index[exits]] = True
            elapsed += n_steps * step
            finite = np.all(np.isfinite(xa), axis=0)
            distance = np.linalg.norm(xa - sep[:, None], axis=0)
            held = np.linalg.norm(model.f_batch(xa, p), axis=0) <= FNORM_LEVEL
            pending = (
                finite & ~exits & ~(distance <= sep_radius) & ((late < early) | held)
            )
            if elapsed >= max_horizon or not np.any(pending):
                break
            logger.debug(
                "%s cells still converging after %g s", int(pending.sum()), elapsed
            )
            active[index[~pending]] = False
        distance = np.linalg.norm(x - sep[:, None], axis=0)
    labels = np.full(points.shape[1], INSIDE)
    labels[~(distance <= sep_radius)] = UNSTABLE
    labels[infeasible] = INFEASIBLE
    return labels


class _Sample(NamedTuple):
    point: np.ndarray
    constraint: int
    line: int


def _on_boundary(h: ConstraintSet, x: np.ndarray, p: np.ndarray) -> Optional[int]:
    """Return which constraint vanishes at x if x is on the boundary of the
    feasible set, that is no other constraint is violated there."""
    values = h.values(x, p)
    active = int(np.argmin(np.abs(values)))
    others = np.delete(values, active)
    if np.all(others >= -SADDLE_TOLERANCE):
        return active
    return None


def _line_roots(
    h: ConstraintSet, p: np.ndarray, point: Any, nodes: np.ndarray, values: np.ndarray
) -> List[float]:
    """Roots of H along one grid line, point(s) giving the state at s and
    values holding H at the nodes."""
    roots = [float(s) for s, v in zip(nodes, values) if v == 0]
    for a, b, va, vb in zip(nodes[:-1], nodes[1:], values[:-1], values[1:]):
        if va * vb < 0:
            roots.append(brentq(lambda s: h.H(point(s), p), a, b, xtol=ROOT_TOLERANCE))
    return sorted(roots)


def _boundary_samples(
    h: ConstraintSet, p: np.ndarray, xs: np.ndarray, ys: np.ndarray
) -> Tuple[List[_Sample], List[_Sample]]:
    """Sample the boundary along every row (fixed y) and column (fixed x)."""
    grid = h.H_batch(np.stack(np.meshgrid(xs, ys)), p)
    rows: List[_Sample] = []
    for j, y in enumerate(ys):
        line = lambda s, y=y: np.array([s, y])  # noqa: E731
        for root in _line_roots(h, p, line, xs, grid[j, :]):
            x = np.array([root, y])
            active = _on_boundary(h, x, p)
            if active is not None:
                rows.append(_Sample(x, active, j))
    columns: List[_Sample] = []
    for i, x0 in enumerate(xs):
        line = lambda s, x0=x0: np.array([x0, s])  # noqa: E731
        for root in _line_roots(h, p, line, ys, grid[:, i]):
            x = np.array([x0, root])
            active = _on_boundary(h, x, p)
            if active is not None:
                columns.append(_Sample(x, active, i))
    return rows, columns


def _bisect_semi_saddle(
    model: ParametricModel,
    h: ConstraintSet,
    p: np.ndarray,
    first: _Sample,
    second: _Sample,
    axis: int,
    spacing: float,
) -> Optional[np.ndarray]:
    """
    Bisect between two boundary samples on neighbouring grid lines whose
    dH/dt differ in sign. axis is the coordinate that is fixed along the
    lines; the other coordinate is re-solved on the boundary at every step.
    """
    free = 1 - axis
    lo, hi = first.point.copy(), second.point.copy()
    sign_lo = np.sign(h.hdot(model, lo, p))
    while abs(hi[axis] - lo[axis]) > SADDLE_TOLERANCE:
        middle = 0.5 * (lo + hi)

        def point(s: float, middle: np.ndarray = middle) -> np.ndarray:
            x = middle.copy()
            x[free] = s
            return x

        a = min(lo[free], hi[free]) - spacing
        b = max(lo[free], hi[free]) + spacing
        try:
            middle[free] = brentq(
                lambda s: h.H(point(s), p), a, b, xtol=ROOT_TOLERANCE
            )
        except ValueError:
            return None
        if np.sign(h.hdot(model, middle, p)) == sign_lo:
            lo = middle
        else:
            hi = middle
    return 0.5 * (lo + hi)


def _semi_saddles(
    model: ParametricModel,
    h: ConstraintSet,
    p: np.ndarray,
    samples: List[_Sample],
    axis: int,
    spacing: float,
) -> List[np.ndarray]:
    found: List[np.ndarray] = []
    by_line: Dict[int, List[_Sample]] = {}
    for sample in samples:
        by_line.setdefault(sample.line, []).append(sample)
    free = 1 - axis
    for line, current in sorted(by_line.items()):
        for sample in current:
            neighbours = [
                other
                for other in by_line.get(line + 1, [])
                if other.constraint == sample.constraint
                and abs(other.point[free] - sample.point[free]) <= 2 * spacing
            ]
            if not neighbours:
                continue
            other = min(
                neighbours, key=lambda o: abs(o.point[free] - sample.point[free])
            )
            if np.sign(h.hdot(model, sample.point, p)) == np.sign(
                h.hdot(model, other.point, p)
            ):
                continue
            x = _bisect_semi_saddle(model, h, p, sample, other, axis, spacing)
            if x is not None:
                found.append(x)
    return found


def _uep_seeds(
    model: ParametricModel, p: np.ndarray, xs: np.ndarray, ys: np.ndarray
) -> List[np.ndarray]:
    """Grid nodes where the norm of the field is a discrete local minimum."""
    X, Y = np.meshgrid(xs, ys)
    with np.errstate(all="ignore"):
        norms = np.linalg.norm(model.f_batch(np.stack((X, Y)), p), axis=0)
    seeds = []
    for j in range(1, len(ys) - 1):
        for i in range(1, len(xs) - 1):
            block = norms[j - 1 : j + 2, i - 1 : i + 2]
            if norms[j, i] <= block.min():
                seeds.append(np.array([xs[i], ys[j]]))
    return seeds


def map_csr(
    scenario: Scenario,
    p: Optional[np.ndarray] = None,
    x_range: Optional[Sequence[float]] = None,
    y_range: Optional[Sequence[float]] = None,
    resolution: Tuple[int, int] = (201, 201),
    t_max: Optional[float] = None,
    step: float = 1e-3,
    sep_radius: float = 1e-3,
    max_horizon: Optional[float] = None,
) -> CsrGrid:
    """
    Map the constrained stability region of the post-fault system over a
    rectangular window, by default the window of the scenario. Cells still
    converging at t_max are followed up to max_horizon.
    """
    if scenario.dim != 2:
        raise DimensionUnsupported(f"{scenario.name} has {scenario.dim} states")
    p = scenario.p0.copy() if p is None else np.array(p, dtype=float)
    model, h = scenario.post, scenario.h_post
    sep = find_equilibrium(model, p, scenario.sep_guess)
    if sep.kind != EquilibriumKind.SEP:
        sep = find_equilibrium(
            model, p, find_equilibrium(scenario.pre, p, scenario.sep_guess).x
        )
    if x_range is None or y_range is None:
        if scenario.window is not None:
            default_x, default_y = scenario.window
        else:
            default_x = sep.x[0] + np.array([-2.5, 2.5])
            default_y = sep.x[1] + np.array([-2.5, 2.5])
        x_range = default_x if x_range is None else x_range
        y_range = default_y if y_range is None else y_range
    xs = np.linspace(x_range[0], x_range[1], resolution[0])
    ys = np.linspace(y_range[0], y_range[1], resolution[1])
    X, Y = np.meshgrid(xs, ys)
    logger.info(
        "mapping %s cells of %s over %s x %s",
        X.size,
        scenario.name,
        tuple(x_range),
        tuple(y_range),
    )
    labels = _label_cells(
        model,
        h,
        p,
        sep.x,
        np.stack((X.ravel(), Y.ravel())),
        scenario.t_max if t_max is None else t_max,
        step,
        sep_radius,
        max_horizon,
    ).reshape(X.shape)

    rows, columns = _boundary_samples(h, p, xs, ys)
    boundary: List[PseudoEpClass] = []
    for sample in rows + columns:
        try:
            boundary.append(classify_boundary_point(h, model, sample.point, p))
        except NotOnBoundary:
            continue
    saddles: List[np.ndarray] = []
    candidates = _semi_saddles(model, h, p, rows, 1, xs[1] - xs[0])
    candidates += _semi_saddles(model, h, p, columns, 0, ys[1] - ys[0])
    for x in candidates:
        try:
            kind = classify_boundary_point(h, model, x, p).kind
        except NotOnBoundary:
            continue
        if kind == "semi-saddle" and all(
            np.linalg.norm(x - s) > 1e-6 for s in saddles
        ):
            saddles.append(x)

    ueps: List[Equilibrium] = []
    for seed in _uep_seeds(model, p, xs, ys):
        try:
            equilibrium = find_equilibrium(model, p, seed)
        except (NoConvergence, SingularJacobian):
            continue
        x = equilibrium.x
        inside = (
            x_range[0] <= x[0] <= x_range[1] and y_range[0] <= x[1] <= y_range[1]
        )
        if (
            equilibrium.kind == EquilibriumKind.UEP
            and inside
            and h.is_feasible(x, p)
            and all(np.linalg.norm(x - u.x) > 1e-6 for u in ueps)
        ):
            ueps.append(equilibrium)
    logger.info(
        "%s boundary samples, %s semi-saddles, %s UEPs in the feasible region",
        len(boundary),
        len(saddles),
        len(ueps),
    )
    return CsrGrid(
        (float(x_range[0]), float(x_range[1])),
        (float(y_range[0]), float(y_range[1])),
        (len(xs), len(ys)),
        xs,
        ys,
        labels,
        boundary,
        saddles,
        ueps,
        sep.x,
    )
