"""Exception types shared across the toolkit."""


class InvalidParameterError(ValueError):
    pass


class UndefinedStateError(ValueError):
    pass


class StepSizeError(ValueError):
    pass


class BasisSizeError(ValueError):
    pass


class InsufficientBasisError(ValueError):
    pass


class NumericalFailure(RuntimeError):
    pass
