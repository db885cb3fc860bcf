"""Exception types shared across the package."""


class ParseError(ValueError):
    """Malformed input file (CSV, libsvm, graph, config)."""


class DimensionError(ValueError):
    """Vector/matrix size does not match the graph or embedding."""


class ParameterError(ValueError):
    """Argument outside its documented range."""


class ConnectivityError(ValueError):
    """Operation requires a connected graph."""


class ConvergenceError(RuntimeError):
    """Iterative solver failed to meet its tolerance.

    Carries the best residuals seen so far in ``residuals``.
    """

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class NumericalError(RuntimeError):
    """Non-finite or otherwise unusable intermediate value."""


class ScalingError(RuntimeError):
    """Edge-weight scaling violated an internal invariant (w <= 0)."""
