"""Exception types shared across the toolkit."""


class ToolkitError(Exception):
    """Base class for all toolkit failures."""


class RangeError(ToolkitError, ValueError):
    """A parameter is outside its admissible range."""


class NoRealRootsError(RangeError):
    """The admissible flow-exponent quadratic has no real roots."""


class PositivityError(ToolkitError, ValueError):
    """An operation required a positive field and did not get one."""


class ConvergenceError(ToolkitError, RuntimeError):
    """An iterative solver failed to reach its tolerance."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class SingularJacobianError(ToolkitError, RuntimeError):
    """A Newton system is (numerically) singular, e.g. at a bifurcation."""


class DampingError(ToolkitError, RuntimeError):
    """Newton damping could not restore positivity or residual decrease."""
