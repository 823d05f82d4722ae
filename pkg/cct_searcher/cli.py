"""
The cct-searcher command line.

    cct-searcher cct --scenario smib --set dmax=2.26
    cct-searcher sens --scenario smib --verify --out sens.json
    cct-searcher sweep --scenario smib --param M --values 0.1:0.01:0.3
    cct-searcher csr --scenario smib --resolution 101 --out csr.csv
    cct-searcher trace --scenario smib --phase fault --duration 1 --out fault.csv

Exit codes are 0 on success, 1 when a solver fails and 2 for usage, file and
scenario errors.
"""
import argparse
import contextlib
import json
import logging
import os
import sys
import tempfile
from typing import Any, Dict, Iterator, List, Optional, Sequence

import logzero
from logzero import logger

from .cct_searcher import find_cct
from .csr_map import map_csr
from .exception import InvalidParameter, ScenarioError, SolverError
from .integrator import DEFAULT_STEP, SensTrajectory, integrate, write_trajectory_csv
from .models import Scenario, find_equilibrium, load_scenario
from .oracle import FdSpec, fd_cct_sensitivity
from .sensitivity import sensitivity_report
from .sweep import SweepSpec, run_sweep, sweep_table, write_sweep_csv
from .utils import round_significant

__all__ = ("main", "build_parser")


def _override(text: str) -> Dict[str, float]:
    name, sep, value = text.partition("=")
    if not sep or not name.strip():
        raise argparse.ArgumentTypeError(f"expected name=value, got {text!r}")
    try:
        return {name.strip(): float(value)}
    except ValueError:
        raise argparse.ArgumentTypeError(f"{value!r} is not a number") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cct-searcher",
        description="Critical clearing times of constrained power systems "
        "and their parameter sensitivities.",
    )
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true")
    verbosity.add_argument("-q", "--quiet", action="store_true")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--scenario",
        required=True,
        help="a scenario file, or the name of a shipped scenario",
    )
    common.add_argument(
        "--set",
        dest="overrides",
        type=_override,
        action="append",
        default=[],
        metavar="NAME=VALUE",
        help="override a parameter of the scenario",
    )
    common.add_argument("--out", help="write the output here instead of stdout")
    common.add_argument("--step", type=float, default=DEFAULT_STEP)
    common.add_argument("--tmax", type=float, default=None)

    search = argparse.ArgumentParser(add_help=False)
    search.add_argument("--tol", type=float, default=0.01)
    search.add_argument(
        "--verify",
        action="store_true",
        help="compare with central finite differences of the clearing time",
    )

    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser(
        "cct", parents=[common, search], help="search the critical clearing time"
    )
    sens = commands.add_parser(
        "sens", parents=[common, search], help="sensitivities of the clearing time"
    )
    sens.add_argument("--params", help="comma separated parameter names")
    sweep = commands.add_parser(
        "sweep", parents=[common, search], help="sweep one parameter"
    )
    sweep.add_argument("--param", required=True)
    sweep.add_argument(
        "--values", required=True, help="start:step:stop or a comma separated list"
    )
    sweep.add_argument("--workers", type=int, default=1)
    csr = commands.add_parser(
        "csr", parents=[common], help="map the constrained stability region"
    )
    csr.add_argument("--resolution", type=int, nargs="+", default=[201])
    csr.add_argument("--xrange", type=float, nargs=2, default=None)
    csr.add_argument("--yrange", type=float, nargs=2, default=None)
    trace = commands.add_parser(
        "trace", parents=[common], help="dump a trajectory with its sensitivities"
    )
    trace.add_argument("--phase", choices=("pre", "fault", "post"), default="fault")
    trace.add_argument("--duration", type=float, default=1.0)
    trace.add_argument(
        "--clear", type=float, default=0.0, help="fault duration before a post trace"
    )
    return parser


@contextlib.contextmanager
def _output(path: Optional[str]) -> Iterator[Any]:
    """Yield a file for the output. A file is only put in place once all of
    it has been written."""
    if path is None:
        yield sys.stdout
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".part")
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as f:
            yield f
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.remove(tmp)


def _write_json(data: Any, path: Optional[str]) -> None:
    with _output(path) as f:
        json.dump(data, f, indent=2)
        f.write("\n")


def _search_kwargs(args: argparse.Namespace) -> Dict[str, Any]:
    kwargs: Dict[str, Any] = {"step": args.step, "tol": args.tol}
    if args.tmax is not None:
        kwargs["t_max"] = args.tmax
    return kwargs


def cmd_cct(scenario: Scenario, args: argparse.Namespace) -> None:
    result = find_cct(scenario, **_search_kwargs(args))
    logger.info(str(result))
    _write_json(result.to_jsonable(), args.out)


def cmd_sens(scenario: Scenario, args: argparse.Namespace) -> None:
    kwargs = _search_kwargs(args)
    result = find_cct(scenario, **kwargs)
    params = None
    if args.params:
        params = [name.strip() for name in args.params.split(",")]
        for name in params:
            scenario.param_index(name)
    report = sensitivity_report(scenario, scenario.p0, result, params)
    logger.info("category %s sensitivities\n%s", result.category, report.table())
    records: List[Dict[str, Any]] = []
    for entry in report:
        record = {
            "param": entry.param,
            "category": entry.category,
            "dtcr_dp": round_significant(entry.dtcr_dp),
            "denominator": round_significant(entry.denominator),
        }
        if entry.error is not None:
            record["error"] = entry.error
        if args.verify:
            try:
                oracle = fd_cct_sensitivity(
                    scenario,
                    scenario.p0,
                    scenario.param_index(entry.param),
                    FdSpec(),
                    **kwargs,
                )
            except SolverError as e:
                logger.warning("no finite difference for %s: %s", entry.param, e)
                record["oracle_error"] = type(e).__name__
                records.append(record)
                continue
            record["oracle_fd"] = round_significant(oracle)
            if entry.dtcr_dp is not None:
                scale = max(abs(oracle), 1e-12)
                gap = abs(entry.dtcr_dp - oracle) / scale
                record["rel_err"] = round_significant(gap)
        records.append(record)
    _write_json(records, args.out)


def cmd_sweep(scenario: Scenario, args: argparse.Namespace) -> None:
    spec = SweepSpec.parse(args.param, args.values)
    scenario.param_index(spec.param)
    rows = run_sweep(
        scenario,
        spec,
        workers=args.workers,
        verify=args.verify,
        **_search_kwargs(args),
    )
    if rows:
        logger.info("\n%s", sweep_table(spec.param, rows))
    with _output(args.out) as f:
        write_sweep_csv(rows, f)


def cmd_csr(scenario: Scenario, args: argparse.Namespace) -> None:
    resolution = args.resolution * 2 if len(args.resolution) == 1 else args.resolution
    if len(resolution) != 2 or min(resolution) < 3:
        raise InvalidParameter("the resolution is one or two integers of at least 3")
    grid = map_csr(
        scenario,
        x_range=args.xrange,
        y_range=args.yrange,
        resolution=(resolution[0], resolution[1]),
        t_max=args.tmax,
        step=args.step,
    )
    logger.info(
        "%s of %s cells inside the constrained stability region",
        grid.count("inside-CSR"),
        grid.labels.size,
    )
    if args.out is None:
        grid.write_json(sys.stdout)
        return
    json_path = os.path.splitext(args.out)[0] + ".json"
    with _output(json_path) as f:
        grid.write_json(f)
    with _output(args.out) as f:
        grid.write_csv(f)


def cmd_trace(scenario: Scenario, args: argparse.Namespace) -> None:
    p = scenario.p0
    if args.duration < 0 or args.clear < 0:
        raise InvalidParameter("durations must not be negative")
    if args.out is None:
        raise InvalidParameter("trace needs --out")
    x0 = find_equilibrium(scenario.pre, p, scenario.sep_guess).x
    model, h = scenario.fault, scenario.h_fault
    if args.phase == "pre":
        model = scenario.pre
    elif args.phase == "post":
        if args.clear > 0:
            x0 = integrate(
                scenario.fault,
                scenario.h_fault,
                x0,
                p,
                args.clear,
                step=args.step,
                sensitivities=False,
                detect_events=False,
            ).final_state
        model, h = scenario.post, scenario.h_post
    if args.duration == 0:
        traj = SensTrajectory.single_point(model, x0, p, h, step=args.step)
    else:
        traj = integrate(model, h, x0, p, args.duration, step=args.step)
        for event in traj.events:
            logger.info("%s at %.6f s", event.kind, event.time)
    with _output(args.out) as f:
        write_trajectory_csv(traj, f)


COMMANDS = {
    "cct": cmd_cct,
    "sens": cmd_sens,
    "sweep": cmd_sweep,
    "csr": cmd_csr,
    "trace": cmd_trace,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.verbose:
        logzero.loglevel(logging.DEBUG)
    elif args.quiet:
        logzero.loglevel(logging.WARNING)
    try:
        overrides: Dict[str, float] = {}
        for override in args.overrides:
            overrides.update(override)
        scenario = load_scenario(args.scenario, overrides)
        COMMANDS[args.command](scenario, args)
    except ScenarioError as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return 2
    except SolverError as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
