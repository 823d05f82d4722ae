"""
Parameter sweeps: the critical clearing time and its sensitivity over a list
of values of one parameter, optionally checked against finite differences.
"""
import csv
import json
import multiprocessing
from typing import Any, Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import tabulate
from logzero import logger

from .cct_searcher import find_cct
from .exception import InvalidParameter, SolverError
from .models import Scenario
from .oracle import FdSpec, fd_cct_sensitivity
from .sensitivity import sensitivity_report
from .utils import format_number

__all__ = ("SweepRow", "SweepSpec", "run_sweep", "write_sweep_csv", "SWEEP_COLUMNS")

SWEEP_COLUMNS = (
    "param_value",
    "t_cr",
    "category",
    "dtcr_dp_formula",
    "dtcr_dp_oracle",
    "status",
)


class SweepSpec(NamedTuple):
    """The parameter to sweep and the strictly monotone values it takes."""

    param: str
    values: Tuple[float, ...]

    @classmethod
    def parse(cls, param: str, text: str) -> "SweepSpec":
        """
        Read either start:step:stop, stop included, or a comma separated list.

        >>> SweepSpec.parse("M", "0.1:0.05:0.3").values
        (0.1, 0.15, 0.2, 0.25, 0.3)
        >>> SweepSpec.parse("M", "").values
        ()
        """
        text = text.strip()
        if not text:
            return cls(param, ())
        try:
            if ":" in text:
                start, step, stop = (float(v) for v in text.split(":"))
                if step == 0:
                    raise InvalidParameter("the sweep step must be nonzero")
                count = int(np.floor((stop - start) / step + 1e-9)) + 1
                values: Iterable[float] = (
                    round(start + k * step, 12)
                    for k in range(max(count, 0))
                )
            else:
                values = (float(v) for v in text.split(","))
            spec = cls(param, tuple(values))
        except ValueError:
            raise InvalidParameter(f"cannot read sweep values {text!r}") from None
        spec.check()
        return spec

    def check(self) -> None:
        steps = np.diff(self.values)
        if len(steps) and not (np.all(steps > 0) or np.all(steps < 0)):
            raise InvalidParameter("sweep values must be strictly monotone")


class SweepRow(NamedTuple):
    param_value: float
    t_cr: Optional[float] = None
    category: Optional[int] = None
    dtcr_dp_formula: Optional[float] = None
    dtcr_dp_oracle: Optional[float] = None
    status: str = "ok"

    def to_csv_row(self) -> List[str]:
        return [
            format_number(self.param_value),
            format_number(self.t_cr),
            "" if self.category is None else str(self.category),
            format_number(self.dtcr_dp_formula),
            format_number(self.dtcr_dp_oracle),
            self.status,
        ]


_SCENARIOS: Dict[str, Scenario] = {}


def _scenario(config: Dict[str, Any]) -> Scenario:
    key = json.dumps(config, sort_keys=True)
    if key not in _SCENARIOS:
        _SCENARIOS[key] = Scenario.from_dict(config, validate=False)
    return _SCENARIOS[key]


def sweep_point(
    scenario: Scenario,
    p: np.ndarray,
    param_index: int,
    verify: bool = False,
    fd_spec: FdSpec = FdSpec(),
    **search_kwargs,
) -> SweepRow:
    """Search, differentiate and optionally verify one point of a sweep."""
    value = float(p[param_index])
    name = scenario.param_names[param_index]
    try:
        scenario.check_parameters(p)
        result = find_cct(scenario, p, **search_kwargs)
    except (SolverError, InvalidParameter) as e:
        logger.warning("%s = %s: %s", name, value, e)
        return SweepRow(value, status=type(e).__name__)
    try:
        entry = sensitivity_report(scenario, p, result, [name])[name]
    except SolverError as e:
        logger.warning("no sensitivity at %s = %s: %s", name, value, e)
        return SweepRow(value, result.t_cr, result.category, status=type(e).__name__)
    row = SweepRow(
        value,
        result.t_cr,
        result.category,
        entry.dtcr_dp,
        status=entry.error or "ok",
    )
    if verify:
        try:
            row = row._replace(
                dtcr_dp_oracle=fd_cct_sensitivity(
                    scenario, p, param_index, fd_spec, **search_kwargs
                )
            )
        except SolverError as e:
            logger.warning("no finite difference at %s = %s: %s", name, value, e)
            if row.status == "ok":
                row = row._replace(status=type(e).__name__)
    return row


Job = Tuple[Dict[str, Any], List[float], int, bool, Dict[str, Any]]


def _work(args: Job) -> SweepRow:
    config, p, param_index, verify, search_kwargs = args
    return sweep_point(
        _scenario(config), np.array(p), param_index, verify, **search_kwargs
    )


def run_sweep(
    scenario: Scenario,
    spec: SweepSpec,
    p0: Optional[np.ndarray] = None,
    workers: int = 1,
    verify: bool = False,
    **search_kwargs,
) -> List[SweepRow]:
    """
    Return one row per swept value, in the order of the values. With more than
    one worker the points are searched in separate processes, each rebuilding
    the scenario from its description.
    """
    spec.check()
    index = scenario.param_index(spec.param)
    p0 = scenario.p0.copy() if p0 is None else np.array(p0, dtype=float)
    points = []
    for value in spec.values:
        p = p0.copy()
        p[index] = value
        points.append(p)
    logger.info(
        "sweeping %s over %s values with %s worker(s)", spec.param, len(points), workers
    )
    if workers <= 1 or len(points) <= 1:
        return [
            sweep_point(scenario, p, index, verify, **search_kwargs) for p in points
        ]
    config = scenario.to_jsonable()
    jobs = [(config, list(p), index, verify, search_kwargs) for p in points]
    with multiprocessing.Pool(processes=min(workers, len(jobs))) as pool:
        return list(pool.imap(_work, jobs))


def write_sweep_csv(rows: Sequence[SweepRow], f) -> None:
    writer = csv.writer(f)
    writer.writerow(SWEEP_COLUMNS)
    for row in rows:
        writer.writerow(row.to_csv_row())


def sweep_table(param: str, rows: Sequence[SweepRow]) -> str:
    """A readable summary of the sweep."""
    return tabulate.tabulate(
        [
            (
                format_number(r.param_value),
                "" if r.t_cr is None else f"{r.t_cr:.6f}",
                r.category or "",
                "" if r.dtcr_dp_formula is None else f"{r.dtcr_dp_formula:.6g}",
                "" if r.dtcr_dp_oracle is None else f"{r.dtcr_dp_oracle:.6g}",
                r.status,
            )
            for r in rows
        ],
        headers=(param, "t_cr", "Category", "Formula", "Finite difference", "Status"),
    )
