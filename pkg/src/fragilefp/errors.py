"""Exception types shared across the toolkit."""


class FragileFPError(Exception):
    pass


class ShapeError(FragileFPError, ValueError):
    pass


class ParameterError(FragileFPError, ValueError):
    pass


class DegenerateError(FragileFPError, ValueError):
    """Raised when a statistic is undefined for the given input (constant data, all-zero subband)."""


class NumericalError(FragileFPError, ArithmeticError):
    pass


class InfeasibleError(NumericalError):
    pass


class SolverTimeout(NumericalError):
    pass


class ManifestError(FragileFPError, ValueError):
    pass
