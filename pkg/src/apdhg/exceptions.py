"""Exception types shared across the package."""


class ShapeError(ValueError):
    """An input vector does not match the operator or transform it is passed to."""


class ConfigurationError(ValueError):
    """A problem or solver parameter is outside its valid range."""


class DivergenceError(RuntimeError):
    """The iteration produced non-finite values.

    Attributes
    ----------
    iteration : int
        Index of the step that produced the first NaN/Inf.
    """

    def __init__(self, iteration, message=None):
        self.iteration = iteration
        super().__init__(message or f"non-finite iterate at iteration {iteration}")
