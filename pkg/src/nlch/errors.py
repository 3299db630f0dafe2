"""Exception hierarchy.

Every error raised by the toolkit derives from :class:`NLCHError`. The
``exit_code`` attribute is what the command line returns when the error
escapes a subcommand.
"""


class NLCHError(Exception):
    exit_code = 1


# -- input validation (exit code 2) -------------------------------------------

class ValidationError(NLCHError, ValueError):
    exit_code = 2


class InvalidSpec(ValidationError):
    pass


class NonPositiveCoefficient(ValidationError):
    pass


class DegeneratePotential(ValidationError):
    pass


class OutOfDomain(ValidationError):
    pass


class GridMismatch(ValidationError):
    pass


class NonZeroMean(ValidationError):
    pass


class InsufficientData(ValidationError):
    pass


class ParseError(ValidationError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


# -- numerical failures (exit code 3) -----------------------------------------

class NumericalError(NLCHError, ArithmeticError):
    exit_code = 3


class NoConvergence(NumericalError):
    pass


class NewtonDiverged(NumericalError):
    pass


class BarrierViolation(NumericalError):
    pass


class DtUnderflow(NumericalError):
    pass


# -- I/O (exit code 4) ---------------------------------------------------------

class IoError(NLCHError, OSError):
    exit_code = 4


class FormatError(IoError):
    pass
