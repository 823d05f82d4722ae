"""Timing, memory and number formatting helpers shared by the package."""
import functools
import os
import time
from typing import TYPE_CHECKING, Any, Callable, Iterable, List, Optional, TypeVar, cast

import numpy as np
import psutil

if TYPE_CHECKING:
    from cct_searcher import CriticalClearingTimeSearcher


Func = TypeVar("Func", bound=Callable[..., Any])

SIGNIFICANT_DIGITS = 12
MEMORY_UNITS = ("KiB", "MiB", "GiB")


class searchmethodtimer:
    """Count the calls of a searcher phase and add up the time spent in it."""

    def __init__(self, phase: str):
        self.phase = phase

    def __call__(self, func: Func) -> Func:
        @functools.wraps(func)
        def timed(searcher: "CriticalClearingTimeSearcher", *args, **kwargs):
            start = time.perf_counter()
            try:
                return func(searcher, *args, **kwargs)
            finally:
                searcher.func_times[self.phase] += time.perf_counter() - start
                searcher.func_calls[self.phase] += 1

        return cast(Func, timed)


def format_number(value: Optional[float]) -> str:
    """
    Return the value printed to twelve significant digits.

    >>> format_number(0.1 + 0.2)
    '0.3'
    >>> format_number(2 / 3)
    '0.666666666667'
    >>> format_number(None)
    ''
    """
    if value is None:
        return ""
    return format(float(value), f".{SIGNIFICANT_DIGITS}g")


def round_significant(value: Optional[float]) -> Optional[float]:
    """
    Round a float to twelve significant digits, keeping None and non-finite
    values as they are.

    >>> round_significant(1 / 3)
    0.333333333333
    """
    if value is None or not np.isfinite(value):
        return value
    return float(format_number(value))


def jsonable_vector(values: Optional[Iterable[float]]) -> Optional[List[float]]:
    """Return a list of rounded floats, or None."""
    if values is None:
        return None
    return [cast(float, round_significant(float(v))) for v in values]


def get_mem() -> int:
    """Resident memory of the current process in bytes."""
    return int(psutil.Process(os.getpid()).memory_info().rss)


def size_to_readable(size: int) -> str:
    """
    >>> size_to_readable(2048)
    '2 KiB'
    >>> size_to_readable(3 * 1024 ** 2)
    '3.0 MiB'
    """
    kib = size / 1024
    if kib < 1024:
        return f"{round(kib)} {MEMORY_UNITS[0]}"
    if kib < 1024 ** 2:
        return f"{round(kib / 1024, 1)} {MEMORY_UNITS[1]}"
    return f"{round(kib / 1024 ** 2, 3)} {MEMORY_UNITS[2]}"
