"""A class for finding the critical clearing time of a constrained system."""
import logging
import platform
import time
from collections import defaultdict
from datetime import timedelta
from typing import Dict, List, NamedTuple, Optional, Tuple

import logzero
import numpy as np
import tabulate
from logzero import logger
from scipy.optimize import minimize_scalar

from .critical_result import Category, CriticalResult
from .exception import (
    Ambiguous,
    BracketFailure,
    CuepNotType1,
    NoFeasibleExit,
)
from .integrator import (
    DEFAULT_STEP,
    EVENT_TOLERANCE,
    FNORM_LEVEL,
    GRAZE_LEVEL,
    Event,
    SensTrajectory,
    detect_feasibility_exit,
    detect_fnorm_min,
    integrate,
)
from .models import Equilibrium, EquilibriumKind, Scenario, find_equilibrium
from .utils import get_mem, searchmethodtimer, size_to_readable

if platform.python_implementation() == "CPython":
    from pympler.asizeof import asizeof

__all__ = [
    "ClearingOutcome",
    "CriticalClearingTimeSearcher",
    "category_from_events",
    "classify_category",
    "find_cct",
    "still_converging",
]

logzero.loglevel(logging.INFO)

COMBINED_BOUNDARY = 1e-5


class ClearingOutcome(NamedTuple):
    """The verdict on clearing the fault at t_cl."""

    t_cl: float
    x_cl: np.ndarray
    stable: bool
    trajectory: Optional[SensTrajectory]
    exit_event: Optional[Event] = None
    fnorm_event: Optional[Event] = None
    fault_infeasible: bool = False


def category_from_events(
    h_comb_value: Optional[float],
    exit_event: Optional[Event],
    fnorm_event: Optional[Event],
    boundary: float = COMBINED_BOUNDARY,
) -> Tuple[Category, Optional[Event], bool]:
    """
    Return the category, the anchoring event and whether the decision was an
    exact tie between an exit and a field norm minimum.

    >>> category_from_events(3e-6, None, None)
    (1, None, False)
    """
    if h_comb_value is not None and abs(h_comb_value) <= boundary:
        return 1, None, False
    if exit_event is None and fnorm_event is None:
        raise Ambiguous("no event on the near-critical unstable trajectory")
    if fnorm_event is None:
        return 2, exit_event, False
    if exit_event is None:
        return 3, fnorm_event, False
    if exit_event.time <= fnorm_event.time:
        return 2, exit_event, exit_event.time == fnorm_event.time
    return 3, fnorm_event, False


class CriticalClearingTimeSearcher:
    """
    The CriticalClearingTimeSearcher class.

    Bisects on the clearing time between a clearing time known to give a
    feasible trajectory converging to the post-fault equilibrium and one known
    to leave the feasible region or lose stability, then decides how the
    system fails at the critical clearing time.
    """

    def __init__(
        self,
        scenario: Scenario,
        p: Optional[np.ndarray] = None,
        step: float = DEFAULT_STEP,
        t_max: Optional[float] = None,
        tol: float = 0.01,
        **kwargs,
    ):
        """
        Initialise CriticalClearingTimeSearcher.

        OTHER INPUT:
            - `sep_radius`: a trajectory returns to the post-fault SEP if it
              ends within this distance of it
            - `settle_radius`: integration stops once a trajectory is this
              close to the post-fault SEP
            - `graze_level`, `fnorm_level`: thresholds for the H-graze and
              field norm minimum events
            - `graze_residual`: a crossing anchors category 2 only if dH/dt
              is this small there
            - `min_width`: refinement of the anchor gives up below this width
            - `max_horizon`: a feasible post-fault run that is still converging
              at the horizon is repeated with the horizon doubled, up to this
              length (default eight times the horizon)
            - `debug`: if True every bisection verdict is logged at DEBUG
            - `logger_kwargs` are passed to the logger when logging
        """
        self.scenario = scenario
        self.p = scenario.p0.copy() if p is None else np.array(p, dtype=float)
        scenario.check_parameters(self.p)
        self.step = step
        self.t_max = scenario.t_max if t_max is None else t_max
        self.tol = tol
        self.sep_radius = kwargs.get("sep_radius", 1e-3)
        self.settle_radius = kwargs.get("settle_radius", 1e-4)
        self.graze_level = kwargs.get("graze_level", GRAZE_LEVEL)
        self.fnorm_level = kwargs.get("fnorm_level", FNORM_LEVEL)
        self.graze_residual = kwargs.get("graze_residual", 1e-4)
        self.min_width = kwargs.get("min_width", 1e-12)
        self.max_horizon = max(kwargs.get("max_horizon", 8 * self.t_max), self.t_max)
        self.probe_offset = kwargs.get("probe_offset", 1e-6)
        self.debug = kwargs.get("debug", False)
        if self.debug:
            logzero.loglevel(logging.DEBUG, True)
        self.logger_kwargs = kwargs.get("logger_kwargs", {"processname": "runner"})

        self.func_times: Dict[str, float] = defaultdict(float)
        self.func_calls: Dict[str, int] = defaultdict(int)

        self._equilibria: Optional[Tuple[Equilibrium, Equilibrium]] = None
        self._sustained: Optional[SensTrajectory] = None
        self._sustained_exit: Optional[Event] = None
        self.brackets: List[Tuple[float, float]] = []

    @searchmethodtimer("equilibria")
    def equilibria(self) -> Tuple[Equilibrium, Equilibrium]:
        """Return the pre-fault and post-fault stable equilibria."""
        if self._equilibria is None:
            pre = find_equilibrium(self.scenario.pre, self.p, self.scenario.sep_guess)
            if pre.kind != EquilibriumKind.SEP:
                raise BracketFailure(f"the pre-fault equilibrium {pre.x} is not stable")
            post = find_equilibrium(self.scenario.post, self.p, pre.x)
            if post.kind != EquilibriumKind.SEP:
                raise BracketFailure(
                    f"the post-fault equilibrium {post.x} is not stable"
                )
            logger.debug(
                "pre-fault SEP %s, post-fault SEP %s",
                pre.x,
                post.x,
                extra=self.logger_kwargs,
            )
            self._equilibria = (pre, post)
        return self._equilibria

    @searchmethodtimer("sustained fault")
    def sustained_fault(self) -> Tuple[SensTrajectory, Event]:
        """
        Return the sustained fault trajectory from the pre-fault SEP, up to
        its first exit from the combined feasible region, with that exit.
        """
        if self._sustained is None or self._sustained_exit is None:
            pre, _ = self.equilibria()
            h_comb = self.scenario.h_comb
            traj = integrate(
                self.scenario.fault,
                h_comb,
                pre.x,
                self.p,
                self.t_max,
                step=self.step,
                sensitivities=False,
                terminal=("H-zero-crossing",),
                detect_events=False,
            )
            exit_event = detect_feasibility_exit(
                traj, graze_level=self.graze_level
            )
            if exit_event is None:
                raise NoFeasibleExit(
                    f"the sustained fault stays feasible for {self.t_max} s"
                )
            self._sustained, self._sustained_exit = traj, exit_event
            logger.debug(
                "sustained fault leaves the feasible region at %s s (%s)",
                exit_event.time,
                exit_event.kind,
                extra=self.logger_kwargs,
            )
        return self._sustained, self._sustained_exit

    @searchmethodtimer("post-fault simulation")
    def simulate_clearing(self, t_cl: float) -> ClearingOutcome:
        """
        Clear the fault at t_cl and decide whether the post-fault trajectory
        stays feasible and returns to the post-fault SEP.
        """
        traj, exit_event = self.sustained_fault()
        _, post_sep = self.equilibria()
        if t_cl >= exit_event.time:
            return ClearingOutcome(
                t_cl, exit_event.state, False, None, fault_infeasible=True
            )
        x_cl = traj.state_at(t_cl)

        def settled(_: float, x: np.ndarray) -> bool:
            return bool(np.linalg.norm(x - post_sep.x) <= self.settle_radius)

        horizon = self.t_max
        while True:
            post = integrate(
                self.scenario.post,
                self.scenario.h_post,
                x_cl,
                self.p,
                horizon,
                step=self.step,
                sensitivities=False,
                terminal=("H-zero-crossing",),
                stop=settled,
                detect_events=False,
            )
            post_exit = detect_feasibility_exit(post, graze_level=self.graze_level)
            returned = settled(0.0, post.final_state) or bool(
                np.linalg.norm(post.final_state - post_sep.x) <= self.sep_radius
            )
            if post_exit is not None or returned or horizon >= self.max_horizon:
                break
            if not still_converging(post, post_sep.x, self.fnorm_level):
                break
            horizon = min(2 * horizon, self.max_horizon)
            logger.debug(
                "clearing at %.9f s is still converging, horizon now %g s",
                t_cl,
                horizon,
                extra=self.logger_kwargs,
            )
        if post_exit is None and returned:
            return ClearingOutcome(t_cl, x_cl, True, post)
        fnorm_event = detect_fnorm_min(post, level=self.fnorm_level)
        return ClearingOutcome(t_cl, x_cl, False, post, post_exit, fnorm_event)

    def _anchor_ready(self, outcome: ClearingOutcome) -> bool:
        """Return True if the unstable outcome anchors a category decision."""
        if outcome.fault_infeasible:
            return True
        try:
            category, event, _ = category_from_events(
                None, outcome.exit_event, outcome.fnorm_event
            )
        except Ambiguous:
            return False
        assert event is not None
        if category == 3 or event.kind == "H-graze":
            return True
        hdot = self.scenario.h_post.hdot(self.scenario.post, event.state, self.p)
        return abs(hdot) <= self.graze_residual

    def find_cct(self) -> CriticalResult:
        """
        Bisect on the clearing time until the bracket is narrower than the
        tolerance and the unstable end of the bracket anchors the category.
        """
        start = time.time()
        logger.info(self.run_information(), extra=self.logger_kwargs)
        pre, post = self.equilibria()
        _, exit_event = self.sustained_fault()
        t_exit = exit_event.time
        if not self.simulate_clearing(0.0).stable:
            raise BracketFailure("clearing the fault immediately is already unstable")
        t_stable, t_unstable = 0.0, t_exit
        self.brackets = [(t_stable, t_unstable)]
        last_unstable: Optional[ClearingOutcome] = None
        iterations = 0
        probe = t_exit - self.probe_offset
        if probe > 0:
            iterations += 1
            outcome = self.simulate_clearing(probe)
            if outcome.stable:
                t_stable = probe
            else:
                t_unstable, last_unstable = probe, outcome
            self.brackets.append((t_stable, t_unstable))
            self._log_verdict(outcome)
        while True:
            width = t_unstable - t_stable
            if width < self.tol:
                if last_unstable is None or self._anchor_ready(last_unstable):
                    break
                if width < self.min_width:
                    raise Ambiguous(
                        f"no anchor found within {width:.3g} s of the critical "
                        "clearing time"
                    )
            t_cl = 0.5 * (t_stable + t_unstable)
            outcome = self.simulate_clearing(t_cl)
            iterations += 1
            if outcome.stable:
                t_stable = t_cl
            else:
                t_unstable, last_unstable = t_cl, outcome
            self.brackets.append((t_stable, t_unstable))
            self._log_verdict(outcome)
        if width < 0.01 * self.tol:
            logger.debug(
                "anchor needed refinement down to a width of %.3g s",
                width,
                extra=self.logger_kwargs,
            )
        result = self._classify(
            t_stable, t_unstable, last_unstable, iterations, pre.x, post.x, t_exit
        )
        self._log_result(result, start)
        return result

    @searchmethodtimer("classification")
    def _classify(
        self,
        t_stable: float,
        t_unstable: float,
        outcome: Optional[ClearingOutcome],
        iterations: int,
        x_pre: np.ndarray,
        x_post: np.ndarray,
        t_exit: float,
    ) -> CriticalResult:
        _, exit_event = self.sustained_fault()
        if outcome is None or outcome.fault_infeasible:
            x_cr = exit_event.state
            h_comb_value: Optional[float] = self.scenario.h_comb.H(x_cr, self.p)
        else:
            x_cr = outcome.x_cl
            h_comb_value = self.scenario.h_comb.H(x_cr, self.p)
        exit_post = None if outcome is None else outcome.exit_event
        fnorm_post = None if outcome is None else outcome.fnorm_event
        category, event, tie = category_from_events(
            h_comb_value, exit_post, fnorm_post
        )
        if tie:
            logger.warning(
                "exit and field norm minimum coincide at %s s, taking category 2",
                event.time if event else None,
                extra=self.logger_kwargs,
            )
        common = dict(
            t_cr=t_unstable,
            x_cr=x_cr,
            t_stable=t_stable,
            t_unstable=t_unstable,
            p=self.p,
            x_pre=x_pre,
            x_post=x_post,
            t_exit=t_exit,
            step=self.step,
            iterations=iterations,
            tie=tie,
        )
        if category == 1 or event is None:
            return CriticalResult(
                category=1, T=None, x_T=None, cuep=None, anchor=None, **common
            )
        if category == 2:
            return CriticalResult(
                category=2,
                T=event.time,
                x_T=event.state,
                cuep=None,
                anchor=event.kind,
                **common,
            )
        assert outcome is not None and outcome.trajectory is not None
        cuep = find_equilibrium(self.scenario.post, self.p, event.state)
        if cuep.kind != EquilibriumKind.UEP or cuep.type != 1:
            raise CuepNotType1(
                f"the equilibrium at {cuep.x} has {cuep.type} unstable eigenvalues"
            )
        T, x_T = closest_approach(outcome.trajectory, cuep.x)
        return CriticalResult(
            category=3,
            T=T,
            x_T=x_T,
            cuep=cuep,
            anchor=event.kind,
            **common,
        )

    def classify_category(
        self, t_stable: float, t_unstable: float
    ) -> Tuple[Category, Optional[float], Optional[np.ndarray]]:
        """Return the category and the anchor (T, x_T) of a converged
        bracket."""
        pre, post = self.equilibria()
        _, exit_event = self.sustained_fault()
        outcome = self.simulate_clearing(t_unstable)
        if outcome.stable:
            raise Ambiguous(f"clearing at {t_unstable} s is stable")
        result = self._classify(
            t_stable,
            t_unstable,
            None if outcome.fault_infeasible else outcome,
            0,
            pre.x,
            post.x,
            exit_event.time,
        )
        return result.category, result.T, result.x_T

    def _log_verdict(self, outcome: ClearingOutcome) -> None:
        if outcome.stable:
            verdict = "stable"
        elif outcome.fault_infeasible:
            verdict = "infeasible during the fault"
        elif outcome.exit_event is not None:
            event = outcome.exit_event
            verdict = f"unstable ({event.kind} at {event.time:.6f} s)"
        else:
            verdict = "unstable (does not return to the SEP)"
        logger.debug(
            "clearing at %.9f s: %s", outcome.t_cl, verdict, extra=self.logger_kwargs
        )

    def run_information(self) -> str:
        """Return string detailing what the searcher is looking for."""
        params = ", ".join(
            f"{name}={value:g}"
            for name, value in zip(self.scenario.param_names, self.p)
        )
        return (
            f"Searching the critical clearing time of {self.scenario.name} "
            f"at {params}\n"
            f"step {self.step:g} s, horizon {self.t_max:g} s, "
            f"tolerance {self.tol:g} s"
        )

    def _log_result(self, result: CriticalResult, start_time: float) -> None:
        found_string = str(result) + "\n"
        time_taken = time.time() - start_time
        found_string += f"Time taken: {timedelta(seconds=int(time_taken))}\n"
        found_string += self.status(elaborate=self.debug)
        logger.info(found_string, extra=self.logger_kwargs)

    def status(self, elaborate: bool) -> str:
        """
        Return a string of the current status of the searcher.

        It includes the times spent in each of the main functions and memory
        usage. "elaborate" status updates are those that provide information
        that may be slow to compute.
        """
        status = "Searcher status:\n"
        total = sum(self.func_times.values())
        status += f"\tTotal time accounted for: {timedelta(seconds=int(total))}\n"
        status += self._time_status(total)
        status += self.mem_status(elaborate)
        return status

    @searchmethodtimer("status")
    def _time_status(self, total: float) -> str:
        table: List[Tuple[str, str, timedelta, str]] = []
        for phase in self.func_calls:
            count = f"{self.func_calls[phase]:,d}"
            time_spent = timedelta(seconds=int(self.func_times[phase]))
            share = self.func_times[phase] * 100 / max(total, 1e-9)
            percentage = f"{int(share)}%"
            table.append((phase, count, time_spent, percentage))
        table.sort(key=lambda row: row[2], reverse=True)
        headers = ["", "Number of \ncalls", "\nTime spent", "\nPercentage"]
        colalign = ("left", "right", "right", "right")
        return (
            "    "
            + tabulate.tabulate(table, headers=headers, colalign=colalign).replace(
                "\n", "\n    "
            )
            + "\n"
        )

    @searchmethodtimer("status")
    def mem_status(self, elaborate: bool) -> str:
        """Provide status information related to memory usage."""
        status = "Memory Status:\n"
        table: List[Tuple[str, str]] = []
        table.append(("OS Allocated", size_to_readable(get_mem())))
        if platform.python_implementation() == "CPython" and elaborate:
            # Warning: "asizeof" can be very slow!
            table.append(("Searcher", size_to_readable(asizeof(self))))
            if self._sustained is not None:
                table.append(
                    ("Sustained fault", size_to_readable(asizeof(self._sustained)))
                )
        status += "    "
        status += tabulate.tabulate(table, colalign=("left", "right")).replace(
            "\n", "\n    "
        )
        status += "\n"
        return status


def still_converging(
    traj: SensTrajectory, sep: np.ndarray, fnorm_level: float = FNORM_LEVEL
) -> bool:
    """
    Return True if a feasible run that has not reached the SEP may still get
    there: it ends held near an equilibrium, or the envelope of its distance
    to the SEP shrinks over the last quarter of the run.
    """
    if traj.f_norms[-1] <= fnorm_level:
        return True
    distance = np.linalg.norm(traj.states - sep, axis=1)
    quarter = len(distance) // 4
    if quarter == 0:
        return False
    recent = distance[-quarter:].max()
    return bool(recent < distance[-2 * quarter : -quarter].max())


def closest_approach(traj: SensTrajectory, x: np.ndarray) -> Tuple[float, np.ndarray]:
    """Return the time and state at which the trajectory passes closest to x."""
    distances = np.linalg.norm(traj.states - x, axis=1)
    index = int(np.argmin(distances))
    start = max(index - 1, 0)
    end = min(index + 1, len(traj.times) - 1)
    if start == end:
        return float(traj.times[index]), traj.states[index]
    res = minimize_scalar(
        lambda tau: np.linalg.norm(traj.advance(start, tau)[0] - x),
        bounds=(0.0, float(traj.times[end] - traj.times[start])),
        method="bounded",
        options={"xatol": EVENT_TOLERANCE},
    )
    tau = float(res.x)
    return float(traj.times[start] + tau), traj.advance(start, tau)[0]


def find_cct(
    scenario: Scenario, p: Optional[np.ndarray] = None, **kwargs
) -> CriticalResult:
    """Search the critical clearing time of the scenario at p."""
    return CriticalClearingTimeSearcher(scenario, p, **kwargs).find_cct()


def classify_category(
    scenario: Scenario,
    p: Optional[np.ndarray],
    bracket: Tuple[float, float],
    **kwargs,
) -> Tuple[Category, Optional[float], Optional[np.ndarray]]:
    """Return the category and anchor (T, x_T) of a converged bracket."""
    searcher = CriticalClearingTimeSearcher(scenario, p, **kwargs)
    return searcher.classify_category(*bracket)
