"""
The outcome of a critical clearing time search.
"""
from typing import Any, Dict, NamedTuple, Optional

import numpy as np
from typing_extensions import Literal

from .models import Equilibrium, EquilibriumKind
from .utils import jsonable_vector, round_significant

__all__ = ("CriticalResult",)

Category = Literal[1, 2, 3]


class CriticalResult(NamedTuple):
    """
    The critical clearing time t_cr with the state x_cr reached on the fault
    trajectory at that time, the failure category, and the anchor of the
    critical post-fault trajectory: the graze state (category 2) or the point
    closest to the controlling equilibrium (category 3) reached T seconds
    after clearing.
    """

    t_cr: float
    x_cr: np.ndarray
    category: Category
    T: Optional[float]
    x_T: Optional[np.ndarray]
    cuep: Optional[Equilibrium]
    t_stable: float
    t_unstable: float
    p: np.ndarray
    x_pre: np.ndarray
    x_post: np.ndarray
    t_exit: float
    step: float
    iterations: int = 0
    anchor: Optional[str] = None
    tie: bool = False

    @property
    def bracket_width(self) -> float:
        return self.t_unstable - self.t_stable

    def __str__(self) -> str:
        string = (
            f"Critical clearing time {self.t_cr:.6f} s "
            f"(bracket [{self.t_stable:.6f}, {self.t_unstable:.6f}]), "
            f"category {self.category}"
        )
        if self.T is not None:
            string += f", anchor {self.anchor} {self.T:.6f} s after clearing"
        return string

    def to_jsonable(self) -> Dict[str, Any]:
        return {
            "t_cr": round_significant(self.t_cr),
            "x_cr": jsonable_vector(self.x_cr),
            "category": self.category,
            "T": round_significant(self.T),
            "x_T": jsonable_vector(self.x_T),
            "cuep": None if self.cuep is None else self.cuep.to_jsonable(),
            "t_stable": round_significant(self.t_stable),
            "t_unstable": round_significant(self.t_unstable),
            "iterations": self.iterations,
            "p": jsonable_vector(self.p),
            "x_pre": jsonable_vector(self.x_pre),
            "x_post": jsonable_vector(self.x_post),
            "t_exit": round_significant(self.t_exit),
            "step": self.step,
            "anchor": self.anchor,
            "tie": self.tie,
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "CriticalResult":
        cuep = None
        if d.get("cuep") is not None:
            cuep = Equilibrium(
                np.array(d["cuep"]["x"], dtype=float),
                EquilibriumKind(d["cuep"]["kind"]),
                tuple(complex(re, im) for re, im in d["cuep"]["eigenvalues"]),
            )

        def vector(key: str) -> Optional[np.ndarray]:
            return None if d.get(key) is None else np.array(d[key], dtype=float)

        return cls(
            t_cr=d["t_cr"],
            x_cr=np.array(d["x_cr"], dtype=float),
            category=d["category"],
            T=d.get("T"),
            x_T=vector("x_T"),
            cuep=cuep,
            t_stable=d["t_stable"],
            t_unstable=d["t_unstable"],
            p=np.array(d["p"], dtype=float),
            x_pre=np.array(d["x_pre"], dtype=float),
            x_post=np.array(d["x_post"], dtype=float),
            t_exit=d["t_exit"],
            step=d["step"],
            iterations=d.get("iterations", 0),
            anchor=d.get("anchor"),
            tie=d.get("tie", False),
        )
