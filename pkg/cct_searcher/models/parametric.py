"""
Parametric vector fields and inequality constraints.

Both are held as sympy expressions over a tuple of state symbols and a tuple
of parameter symbols. All derivatives are produced symbolically and compiled
once with lambdify, so the numeric methods only ever evaluate.
"""
from typing import Any, Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import sympy

from ..exception import DimensionMismatch

__all__ = ("ParametricModel", "ConstraintSet")


def _compile(
    states: Sequence[sympy.Symbol], params: Sequence[sympy.Symbol], exprs: Any
) -> Callable[..., Any]:
    return sympy.lambdify(
        (list(states), list(params)), exprs, modules="numpy", dummify=True
    )


def _stack(values: Sequence[Any], shape: Tuple[int, ...]) -> np.ndarray:
    """Stack evaluated expressions, broadcasting constants to the batch shape."""
    return np.stack(
        [np.broadcast_to(np.asarray(v, dtype=float), shape) for v in values]
    )


class ParametricModel:
    """
    An autonomous vector field dx/dt = f(x; p).

    The model is built from a list of sympy expressions, one per state, and
    keeps the compiled field, state Jacobian and parameter Jacobian.
    """

    def __init__(
        self,
        name: str,
        states: Sequence[sympy.Symbol],
        params: Sequence[sympy.Symbol],
        rhs: Iterable[sympy.Expr],
    ):
        self.name = name
        self.states: Tuple[sympy.Symbol, ...] = tuple(states)
        self.params: Tuple[sympy.Symbol, ...] = tuple(params)
        self.rhs = sympy.Matrix([sympy.sympify(expr) for expr in rhs])
        if self.rhs.shape[0] != len(self.states):
            raise DimensionMismatch(
                f"{name}: {self.rhs.shape[0]} equations for {len(self.states)} states"
            )
        if len(set(self.states) | set(self.params)) != self.dim + self.n_params:
            raise DimensionMismatch(f"{name}: state and parameter names must differ")
        unknown = self.rhs.free_symbols - set(self.states) - set(self.params)
        if unknown:
            raise DimensionMismatch(
                f"{name}: unknown symbols {sorted(str(s) for s in unknown)}"
            )
        self.jacobian_x = self.rhs.jacobian(self.states)
        self.jacobian_p = self.rhs.jacobian(self.params)
        self._f = _compile(self.states, self.params, list(self.rhs))
        self._jac_x = _compile(self.states, self.params, self.jacobian_x.tolist())
        self._jac_p = _compile(self.states, self.params, self.jacobian_p.tolist())

    @property
    def dim(self) -> int:
        return len(self.states)

    @property
    def n_params(self) -> int:
        return len(self.params)

    def f(self, x: np.ndarray, p: np.ndarray) -> np.ndarray:
        """Return the field at the state x."""
        return np.array(self._f(x, p), dtype=float)

    def jac_x(self, x: np.ndarray, p: np.ndarray) -> np.ndarray:
        """Return the n x n state Jacobian."""
        return np.array(self._jac_x(x, p), dtype=float).reshape(self.dim, self.dim)

    def jac_p(self, x: np.ndarray, p: np.ndarray) -> np.ndarray:
        """Return the n x n_p parameter Jacobian."""
        return np.array(self._jac_p(x, p), dtype=float).reshape(
            self.dim, self.n_params
        )

    def f_batch(self, xs: np.ndarray, p: np.ndarray) -> np.ndarray:
        """Evaluate the field on states stacked along the first axis, so
        that xs has shape (n, ...) and so does the result."""
        xs = np.asarray(xs, dtype=float)
        return _stack(self._f(list(xs), p), xs.shape[1:])

    def __repr__(self) -> str:
        return f"ParametricModel({self.name!r}, states={self.states})"

    def __reduce__(self):
        return (
            self.__class__,
            (self.name, self.states, self.params, list(self.rhs)),
        )


class ConstraintSet:
    """
    The inequality constraints h_k(x; p) > 0 of one topology.

    The combined function H is the product of the h_k, so that H = 0 on the
    feasibility boundary. H, its gradients and its Hessians are compiled from
    the symbolic product.
    """

    def __init__(
        self,
        states: Sequence[sympy.Symbol],
        params: Sequence[sympy.Symbol],
        constraints: Iterable[sympy.Expr],
        names: Optional[Iterable[str]] = None,
    ):
        self.states: Tuple[sympy.Symbol, ...] = tuple(states)
        self.params: Tuple[sympy.Symbol, ...] = tuple(params)
        self.constraints: Tuple[sympy.Expr, ...] = tuple(
            sympy.sympify(h) for h in constraints
        )
        if names is None:
            self.names: Tuple[str, ...] = tuple(
                f"h{idx}" for idx in range(len(self.constraints))
            )
        else:
            self.names = tuple(names)
        if len(self.names) != len(self.constraints):
            raise DimensionMismatch("one name is needed per constraint")
        unknown = set().union(*(h.free_symbols for h in self.constraints)) - (
            set(self.states) | set(self.params)
        )
        if unknown:
            raise DimensionMismatch(
                f"unknown symbols in constraints {sorted(str(s) for s in unknown)}"
            )
        self.expression = sympy.Mul(*self.constraints)
        h_vector = sympy.Matrix(list(self.constraints) or [sympy.Integer(1)])
        grad_x = sympy.Matrix([self.expression]).jacobian(self.states)
        grad_p = sympy.Matrix([self.expression]).jacobian(self.params)
        self._values = _compile(self.states, self.params, list(self.constraints))
        self._H = _compile(self.states, self.params, self.expression)
        self._grad_x = _compile(self.states, self.params, list(grad_x))
        self._grad_p = _compile(self.states, self.params, list(grad_p))
        self._hess_xx = _compile(
            self.states, self.params, grad_x.T.jacobian(self.states).tolist()
        )
        self._hess_xp = _compile(
            self.states, self.params, grad_x.T.jacobian(self.params).tolist()
        )
        self._each_grad_x = _compile(
            self.states, self.params, h_vector.jacobian(self.states).tolist()
        )
        self._each_grad_p = _compile(
            self.states, self.params, h_vector.jacobian(self.params).tolist()
        )

    @property
    def count(self) -> int:
        return len(self.constraints)

    @property
    def dim(self) -> int:
        return len(self.states)

    def values(self, x: np.ndarray, p: np.ndarray) -> np.ndarray:
        """Return the vector of h_k."""
        return np.array(self._values(x, p), dtype=float).reshape(self.count)

    def H(self, x: np.ndarray, p: np.ndarray) -> float:
        return float(self._H(x, p))

    def is_feasible(self, x: np.ndarray, p: np.ndarray) -> bool:
        """Return True if every constraint holds strictly."""
        return bool(np.all(self.values(x, p) > 0))

    def grad_x(self, x: np.ndarray, p: np.ndarray) -> np.ndarray:
        return np.array(self._grad_x(x, p), dtype=float).reshape(self.dim)

    def grad_p(self, x: np.ndarray, p: np.ndarray) -> np.ndarray:
        return np.array(self._grad_p(x, p), dtype=float).reshape(len(self.params))

    def hess_xx(self, x: np.ndarray, p: np.ndarray) -> np.ndarray:
        return np.array(self._hess_xx(x, p), dtype=float).reshape(self.dim, self.dim)

    def hess_xp(self, x: np.ndarray, p: np.ndarray) -> np.ndarray:
        return np.array(self._hess_xp(x, p), dtype=float).reshape(
            self.dim, len(self.params)
        )

    def gradients(self, x: np.ndarray, p: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Return the gradients of every h_k with respect to x and to p."""
        rows = max(self.count, 1)
        return (
            np.array(self._each_grad_x(x, p), dtype=float).reshape(rows, self.dim)[
                : self.count
            ],
            np.array(self._each_grad_p(x, p), dtype=float).reshape(
                rows, len(self.params)
            )[: self.count],
        )

    def values_batch(self, xs: np.ndarray, p: np.ndarray) -> np.ndarray:
        """Return the h_k for states stacked along the first axis."""
        xs = np.asarray(xs, dtype=float)
        if not self.count:
            return np.empty((0,) + xs.shape[1:])
        return _stack(self._values(list(xs), p), xs.shape[1:])

    def H_batch(self, xs: np.ndarray, p: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        return np.broadcast_to(
            np.asarray(self._H(list(xs), p), dtype=float), xs.shape[1:]
        ).copy()

    def hdot(self, model: ParametricModel, x: np.ndarray, p: np.ndarray) -> float:
        """Return the rate of change of H along the field."""
        return float(self.grad_x(x, p) @ model.f(x, p))

    def hdot_gradients(
        self, model: ParametricModel, x: np.ndarray, p: np.ndarray
    ) -> Tuple[np.ndarray, np.ndarray]:
        """Return the gradients of dH/dt with respect to x and to p."""
        fx = model.f(x, p)
        grad = self.grad_x(x, p)
        return (
            fx @ self.hess_xx(x, p) + grad @ model.jac_x(x, p),
            fx @ self.hess_xp(x, p) + grad @ model.jac_p(x, p),
        )

    def hddot(self, model: ParametricModel, x: np.ndarray, p: np.ndarray) -> float:
        """Return the second derivative of H along the field."""
        return float(self.hdot_gradients(model, x, p)[0] @ model.f(x, p))

    def combined(self, other: "ConstraintSet") -> "ConstraintSet":
        """
        Return the union of both constraint sets, with constraints that are
        structurally identical kept once.
        """
        if self.states != other.states or self.params != other.params:
            raise DimensionMismatch("constraint sets live on different spaces")
        constraints: List[sympy.Expr] = list(self.constraints)
        names: List[str] = list(self.names)
        for name, h in zip(other.names, other.constraints):
            if any(sympy.expand(h - g) == 0 for g in constraints):
                continue
            constraints.append(h)
            names.append(name if name not in names else f"{name}'")
        return ConstraintSet(self.states, self.params, constraints, names)

    def __repr__(self) -> str:
        return "ConstraintSet({})".format(
            ", ".join(f"{n}: {h} > 0" for n, h in zip(self.names, self.constraints))
        )

    def __reduce__(self):
        return (
            self.__class__,
            (self.states, self.params, self.constraints, self.names),
        )
