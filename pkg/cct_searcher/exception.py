"""Some custom errors."""


class SolverError(Exception):
    """A numerical routine could not produce an answer."""


class ScenarioError(Exception):
    """A scenario could not be loaded or does not make sense."""


class NoConvergence(SolverError):
    """Newton's method ran out of iterations."""


class SingularJacobian(SolverError):
    """The Jacobian is too badly conditioned to solve with."""


class NotOnBoundary(SolverError):
    """The point does not lie on the feasibility boundary."""


class StepFailure(SolverError):
    """The integrator produced a non-finite state."""


class NoFeasibleExit(SolverError):
    """The sustained fault trajectory never leaves the feasible region."""


class BracketFailure(SolverError):
    """Clearing immediately is already unstable or infeasible."""


class CuepNotType1(SolverError):
    """The controlling equilibrium is not a type-1 unstable equilibrium."""


class Ambiguous(SolverError):
    """No event was found on the near-critical unstable trajectory."""


class NonTransversal(SolverError):
    """The sensitivity formula has a vanishing denominator."""


class EigenFailure(SolverError):
    """No unique unstable eigenvalue was found."""


class CategoryChanged(SolverError):
    """The failure category differs between the perturbed parameters."""


class DimensionUnsupported(SolverError):
    """The operation only applies to planar systems."""


class SanityCheckFailure(SolverError):
    """Failed a sanity check."""


class ScenarioNotFound(ScenarioError):
    """scenario not found"""


class ScenarioParseError(ScenarioError):
    """The scenario file is malformed."""


class InvalidParameter(ScenarioError):
    """A parameter value is outside its admissible range."""


class DimensionMismatch(ScenarioError):
    """The sizes of models, parameters or data do not agree."""


class ScenarioRejected(ScenarioError):
    """An equilibrium of the post-fault system lies on the feasibility boundary."""
