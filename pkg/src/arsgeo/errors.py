"""Exception hierarchy.

Every error carries an ``exit_code`` so the CLI can map failures to the
documented process exit status (2 = input, 3 = numeric, 4 = io).
"""


class ArsgeoError(Exception):
    exit_code = 3


class InputError(ArsgeoError, ValueError):
    """Malformed user input: unknown scenario, bad flag, bad expression."""

    exit_code = 2


class ExprSyntaxError(InputError):
    """Expression text does not match the grammar."""

    def __init__(self, message, offset):
        super().__init__(f"{message} at byte offset {offset}")
        self.offset = offset


class UnknownIdentifierError(ExprSyntaxError):
    def __init__(self, name, offset):
        super().__init__(f"unknown identifier {name!r}", offset)
        self.name = name


class NumericError(ArsgeoError):
    exit_code = 3


class DomainError(NumericError, ArithmeticError):
    """Expression evaluated outside its domain (log of non-positive, etc.)."""


class SingularPointError(NumericError):
    """A metric quantity was requested on (or within 1e-12 of) the singular locus."""


class OutOfDomainError(InputError):
    """A point lies outside the chart domain."""


class ChartExitError(NumericError):
    """A trajectory left the chart domain before the requested time."""

    def __init__(self, message, exit_time):
        super().__init__(message)
        self.exit_time = exit_time


class StepSizeUnderflow(NumericError):
    pass


class TangencyError(NumericError):
    """Operation undefined at a tangency (or deeper) point of the singular locus."""


class TubeFoldError(NumericError):
    """Normal-geodesic tube is not injective; use a smaller eps0."""


class ConfigurationError(InputError):
    pass


class OutputError(ArsgeoError, OSError):
    exit_code = 4
