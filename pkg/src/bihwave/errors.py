"""Exception types distinguishing numerical failures from parameter errors.

Parameter and configuration problems raise plain :class:`ValueError`;
the classes here mark failures of the numerics themselves (singular
factorizations, non-converging iterations), which the CLI maps to a
different exit code.
"""


class NumericalError(RuntimeError):
    """A numerical procedure failed (non-convergence, breakdown)."""


class SolverError(NumericalError):
    """The linear solver failed, e.g. on a singular diagonal block."""


class FactorizationError(SolverError):
    """The temporal pencil could not be factorized (singular matrix)."""
