"""
Fixed step fourth order Runge-Kutta integration of a parametric model together
with its variational equations

    d(phi_x)/dt = J phi_x,   d(phi_p)/dt = J phi_p + df/dp,

so that phi_x and phi_p are the exact derivatives of the discrete flow map.
Events are found on the stored grid and refined with partial steps.
"""
import csv
from typing import Callable, Dict, Iterable, List, NamedTuple, Optional, TextIO, Tuple

import numpy as np
from logzero import logger
from scipy.optimize import bisect, minimize_scalar
from typing_extensions import Literal

from .exception import StepFailure
from .models import ConstraintSet, ParametricModel
from .utils import format_number

__all__ = (
    "Event",
    "SensTrajectory",
    "detect_feasibility_exit",
    "detect_fnorm_min",
    "integrate",
    "read_trajectory_csv",
    "write_trajectory_csv",
)

DEFAULT_STEP = 1e-3
GRAZE_LEVEL = 1e-5
FNORM_LEVEL = 1e-3
EVENT_TOLERANCE = 1e-8

EventKind = Literal[
    "H-zero-crossing", "H-graze", "f-norm-local-min", "horizon-reached"
]
StopPredicate = Callable[[float, np.ndarray], bool]
Augmented = Tuple[np.ndarray, Optional[np.ndarray], Optional[np.ndarray]]


class Event(NamedTuple):
    kind: EventKind
    time: float
    state: np.ndarray
    value: float
    phi_x: Optional[np.ndarray] = None
    phi_p: Optional[np.ndarray] = None


def _derivatives(model: ParametricModel, p: np.ndarray, state: Augmented) -> Augmented:
    x, phi_x, phi_p = state
    dx = model.f(x, p)
    if phi_x is None or phi_p is None:
        return dx, None, None
    jac = model.jac_x(x, p)
    return dx, jac @ phi_x, jac @ phi_p + model.jac_p(x, p)


def _shift(state: Augmented, slope: Augmented, c: float) -> Augmented:
    return tuple(  # type: ignore[return-value]
        None if s is None else s + c * k for s, k in zip(state, slope)
    )


def _rk4_step(
    model: ParametricModel, p: np.ndarray, state: Augmented, dt: float
) -> Tuple[Augmented, np.ndarray]:
    """Take one step of length dt, also returning f at the start."""
    k1 = _derivatives(model, p, state)
    k2 = _derivatives(model, p, _shift(state, k1, dt / 2))
    k3 = _derivatives(model, p, _shift(state, k2, dt / 2))
    k4 = _derivatives(model, p, _shift(state, k3, dt))
    new = tuple(
        None if s is None else s + dt / 6 * (a + 2 * b + 2 * c + d)
        for s, a, b, c, d in zip(state, k1, k2, k3, k4)
    )
    return new, k1[0]  # type: ignore[return-value]


class SensTrajectory(NamedTuple):
    """
    A trajectory on the grid t_k = k * step, with the last point landing on
    the final time. The sensitivity arrays are None when they were not
    requested and h_values is None when there were no constraints.
    """

    model: ParametricModel
    p: np.ndarray
    step: float
    times: np.ndarray
    states: np.ndarray
    phi_x: Optional[np.ndarray]
    phi_p: Optional[np.ndarray]
    h_values: Optional[np.ndarray]
    f_norms: np.ndarray
    constraints: Optional[ConstraintSet] = None
    events: Tuple[Event, ...] = ()
    stopped_early: bool = False

    @classmethod
    def single_point(
        cls,
        model: ParametricModel,
        x0: np.ndarray,
        p: np.ndarray,
        h: Optional[ConstraintSet] = None,
        sensitivities: bool = True,
        step: float = DEFAULT_STEP,
    ) -> "SensTrajectory":
        """The trajectory of zero duration starting at x0."""
        x0 = np.array(x0, dtype=float)
        p = np.asarray(p, dtype=float)
        return cls(
            model,
            p,
            step,
            np.zeros(1),
            x0[None, :],
            np.eye(model.dim)[None] if sensitivities else None,
            np.zeros((1, model.dim, model.n_params)) if sensitivities else None,
            None if h is None else np.array([h.H(x0, p)]),
            np.array([np.linalg.norm(model.f(x0, p))]),
            h,
        )

    @property
    def has_sensitivities(self) -> bool:
        return self.phi_x is not None

    @property
    def final_time(self) -> float:
        return float(self.times[-1])

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def event(self, kind: EventKind) -> Optional[Event]:
        """Return the earliest event of the given kind."""
        return next((e for e in self.events if e.kind == kind), None)

    def advance(self, index: int, tau: float) -> Augmented:
        """Return the augmented state a partial step tau after grid point
        index."""
        state: Augmented = (
            self.states[index],
            None if self.phi_x is None else self.phi_x[index],
            None if self.phi_p is None else self.phi_p[index],
        )
        if tau <= 0:
            return state
        return _rk4_step(self.model, self.p, state, tau)[0]

    def sensitivities_at(self, t: float) -> Augmented:
        """Return the state and sensitivities at any time on the trajectory."""
        if t < self.times[0] or t > self.times[-1] + EVENT_TOLERANCE:
            raise ValueError(f"time {t} is outside the trajectory")
        index = max(int(np.searchsorted(self.times, t, side="right")) - 1, 0)
        tau = t - self.times[index]
        if tau <= 1e-12:
            tau = 0.0
        return self.advance(index, tau)

    def state_at(self, t: float) -> np.ndarray:
        return self.sensitivities_at(t)[0]

    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="", encoding="utf-8") as f:
            write_trajectory_csv(self, f)


def integrate(
    model: ParametricModel,
    h: Optional[ConstraintSet],
    x0: np.ndarray,
    p: np.ndarray,
    t_end: float,
    step: float = DEFAULT_STEP,
    sensitivities: bool = True,
    terminal: Iterable[EventKind] = (),
    stop: Optional[StopPredicate] = None,
    detect_events: bool = True,
) -> SensTrajectory:
    """
    Integrate from x0 until t_end.

    With terminal containing "H-zero-crossing" integration stops at the first
    grid point with H <= 0; a stop predicate ends it at the first grid point
    where stop(t, x) holds. Events are detected afterwards on the grid unless
    detect_events is False.
    """
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    if step <= 0:
        raise ValueError("step must be positive")
    x0 = np.array(x0, dtype=float)
    p = np.asarray(p, dtype=float)
    n_full = int(np.floor(t_end / step + 1e-9))
    last = t_end - n_full * step
    if last <= 1e-12 * max(1.0, t_end):
        last = 0.0
    n_steps = n_full + (1 if last > 0 else 0)
    terminal = tuple(terminal)
    stop_on_crossing = h is not None and "H-zero-crossing" in terminal

    times = np.empty(n_steps + 1)
    states = np.empty((n_steps + 1, model.dim))
    f_norms = np.empty(n_steps + 1)
    h_values = None if h is None else np.empty(n_steps + 1)
    phi_x = phi_p = None
    state: Augmented = (x0, None, None)
    if sensitivities:
        phi_x = np.empty((n_steps + 1, model.dim, model.dim))
        phi_p = np.empty((n_steps + 1, model.dim, model.n_params))
        state = (x0, np.eye(model.dim), np.zeros((model.dim, model.n_params)))

    def store(k: int, t: float, current: Augmented) -> None:
        times[k] = t
        states[k] = current[0]
        if phi_x is not None and phi_p is not None:
            phi_x[k] = current[1]
            phi_p[k] = current[2]
        if h_values is not None and h is not None:
            h_values[k] = h.H(current[0], p)

    store(0, 0.0, state)
    k = 0
    stopped = stop is not None and stop(0.0, x0)
    while k < n_steps and not stopped:
        dt = step if k < n_full else last
        state, f_start = _rk4_step(model, p, state, dt)
        f_norms[k] = np.linalg.norm(f_start)
        if not all(s is None or np.all(np.isfinite(s)) for s in state):
            raise StepFailure(
                f"{model.name}: non-finite state after t = {times[k]:.6g}"
            )
        k += 1
        store(k, k * step if k <= n_full else t_end, state)
        if stop_on_crossing and h_values is not None and h_values[k] <= 0:
            stopped = True
        elif stop is not None and stop(times[k], state[0]):
            stopped = True
    f_norms[k] = np.linalg.norm(model.f(states[k], p))
    size = k + 1
    traj = SensTrajectory(
        model,
        p,
        step,
        times[:size],
        states[:size],
        None if phi_x is None else phi_x[:size],
        None if phi_p is None else phi_p[:size],
        None if h_values is None else h_values[:size],
        f_norms[:size],
        h,
        stopped_early=k < n_steps,
    )
    if not detect_events:
        return traj
    events: List[Event] = []
    if h is not None:
        exit_event = detect_feasibility_exit(traj)
        if exit_event is not None:
            events.append(exit_event)
    fnorm_event = detect_fnorm_min(traj, model, p)
    if fnorm_event is not None:
        events.append(fnorm_event)
    if not traj.stopped_early:
        events.append(
            Event(
                "horizon-reached",
                traj.final_time,
                traj.final_state,
                np.nan if h_values is None else float(h_values[-1]),
                None if phi_x is None else phi_x[size - 1],
                None if phi_p is None else phi_p[size - 1],
            )
        )
    return traj._replace(events=tuple(sorted(events, key=lambda e: e.time)))


def _make_event(
    traj: SensTrajectory, kind: EventKind, index: int, tau: float, value: float
) -> Event:
    x, phi_x, phi_p = traj.advance(index, tau)
    return Event(kind, float(traj.times[index] + tau), x, value, phi_x, phi_p)


def _local_minima(values: np.ndarray) -> np.ndarray:
    """Indices k of the interior grid points with v[k-1] > v[k] <= v[k+1]."""
    if len(values) < 3:
        return np.zeros(0, dtype=int)
    middle = values[1:-1]
    return np.flatnonzero((values[:-2] > middle) & (middle <= values[2:])) + 1


def _refine_minimum(
    traj: SensTrajectory, index: int, objective: Callable[[np.ndarray], float]
) -> Tuple[float, float]:
    """Minimise the objective over partial steps from grid point index - 1
    to index + 1, returning (tau from index - 1, value)."""
    start = index - 1
    span = float(traj.times[index + 1] - traj.times[start])
    res = minimize_scalar(
        lambda tau: objective(traj.advance(start, tau)[0]),
        bounds=(0.0, span),
        method="bounded",
        options={"xatol": EVENT_TOLERANCE},
    )
    return float(res.x), float(res.fun)


def _crossing(
    traj: SensTrajectory,
    h: ConstraintSet,
    p: np.ndarray,
    start: int,
    span: float,
    xtol: float,
) -> Event:
    """Refine a sign change of H within a partial step of length span from
    grid point start."""

    def value(tau: float) -> float:
        return h.H(traj.advance(start, tau)[0], p)

    end_value = value(span)
    if end_value > 0:
        return _make_event(traj, "H-zero-crossing", start, span, end_value)
    tau = bisect(value, 0.0, span, xtol=xtol)
    event = _make_event(traj, "H-zero-crossing", start, tau, 0.0)
    return event._replace(value=h.H(event.state, p))


def detect_feasibility_exit(
    traj: SensTrajectory,
    h: Optional[ConstraintSet] = None,
    p: Optional[np.ndarray] = None,
    graze_level: float = GRAZE_LEVEL,
    xtol: float = EVENT_TOLERANCE,
) -> Optional[Event]:
    """
    Return the earliest crossing of H = 0 or the earliest local minimum of H
    with value in (0, graze_level], whichever comes first.
    """
    constraints = traj.constraints if h is None else h
    if constraints is None:
        raise ValueError("no constraints to detect an exit from")
    params = traj.p if p is None else np.asarray(p, dtype=float)
    if constraints is traj.constraints and traj.h_values is not None and p is None:
        values = traj.h_values
    else:
        values = constraints.H_batch(traj.states.T, params)
    if values[0] <= 0:
        return _make_event(traj, "H-zero-crossing", 0, 0.0, float(values[0]))
    nonpositive = np.flatnonzero(values <= 0)
    crossing = int(nonpositive[0]) if len(nonpositive) else len(values)
    for index in _local_minima(values[: crossing + 1]):
        if index >= crossing or values[index] > graze_level + 1e-3:
            continue
        tau, minimum = _refine_minimum(
            traj, index, lambda x: constraints.H(x, params)  # type: ignore[union-attr]
        )
        if minimum <= 0:
            logger.debug("H dips below zero between grid points near t = %s", tau)
            return _crossing(traj, constraints, params, index - 1, tau, xtol)
        if minimum <= graze_level:
            return _make_event(traj, "H-graze", index - 1, tau, minimum)
    if crossing < len(values):
        start = crossing - 1
        span = float(traj.times[crossing] - traj.times[start])
        return _crossing(traj, constraints, params, start, span, xtol)
    return None


def detect_fnorm_min(
    traj: SensTrajectory,
    model: Optional[ParametricModel] = None,
    p: Optional[np.ndarray] = None,
    level: float = FNORM_LEVEL,
) -> Optional[Event]:
    """
    Return the earliest local minimum of the norm of the field along the
    trajectory with value at most level. A trajectory whose field norm is
    still decreasing at the end counts its final point as a minimum.
    """
    model = traj.model if model is None else model
    p = traj.p if p is None else np.asarray(p, dtype=float)
    if model is traj.model and p is traj.p:
        norms = traj.f_norms
    else:
        norms = np.linalg.norm(model.f_batch(traj.states.T, p), axis=0)

    def field_norm(x: np.ndarray) -> float:
        return float(np.linalg.norm(model.f(x, p)))  # type: ignore[union-attr]

    for index in _local_minima(norms):
        if norms[index] > 10 * level:
            continue
        tau, minimum = _refine_minimum(traj, index, field_norm)
        if minimum <= level:
            return _make_event(traj, "f-norm-local-min", index - 1, tau, minimum)
    if len(norms) >= 2 and norms[-1] < norms[-2] and norms[-1] <= level:
        end = len(norms) - 1
        return _make_event(traj, "f-norm-local-min", end, 0.0, float(norms[-1]))
    return None


def write_trajectory_csv(traj: SensTrajectory, f: TextIO) -> None:
    """
    Write the trajectory with columns t, the states, H, then phi_x row by row
    and phi_p row by row. Numbers carry twelve significant digits.
    """
    n = traj.model.dim
    header = ["t"] + [str(s) for s in traj.model.states] + ["H"]
    if traj.phi_x is not None and traj.phi_p is not None:
        header += [f"phi_x[{i}][{j}]" for i in range(n) for j in range(n)]
        header += [
            f"phi_p[{i}][{str(q)}]" for i in range(n) for q in traj.model.params
        ]
    writer = csv.writer(f)
    writer.writerow(header)
    for k, t in enumerate(traj.times):
        row = [t, *traj.states[k]]
        row.append(None if traj.h_values is None else traj.h_values[k])
        if traj.phi_x is not None and traj.phi_p is not None:
            row += list(traj.phi_x[k].ravel()) + list(traj.phi_p[k].ravel())
        writer.writerow(format_number(v) for v in row)


def read_trajectory_csv(f: TextIO) -> Dict[str, np.ndarray]:
    """Read a trajectory dump back as one array per column, with empty cells
    as NaN."""
    reader = csv.reader(f)
    header = next(reader)
    rows = [[float(v) if v else np.nan for v in row] for row in reader if row]
    values = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return {name: values[:, k] for k, name in enumerate(header)}
