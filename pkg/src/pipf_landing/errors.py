class PipfError(Exception):
    """Base class for errors raised by this package."""


class InvalidInputError(PipfError, ValueError):
    pass


class SingularDynamicsError(PipfError, ArithmeticError):
    pass


class PreconditionError(PipfError, ValueError):
    pass
