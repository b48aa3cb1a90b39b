"""Exception hierarchy.

Every error raised by the library derives from :class:`CPWLatticeError`.
The CLI maps :class:`ConfigError` to exit code 1, :class:`NumericError` to
exit code 2 and :class:`OSError` to exit code 3.
"""


class CPWLatticeError(Exception):
    """Base class for library errors."""


class ConfigError(CPWLatticeError, ValueError):
    """Malformed or inconsistent user input (configs, lattice files)."""


class NumericError(CPWLatticeError, ValueError):
    """A computation cannot proceed with the given values."""


# lattice
class EmptyGraph(ConfigError):
    pass


class DegreeTooHigh(ConfigError):
    pass


class InvalidCell(ConfigError):
    pass


class InvalidLattice(ConfigError):
    pass


# numeric preconditions
class NonPositiveInput(NumericError):
    pass


class DimensionMismatch(NumericError):
    pass


class ZeroHopping(NumericError):
    pass


class Underdetermined(NumericError):
    pass


class NoConvergence(NumericError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class TransmonApproxInvalid(NumericError):
    pass


class ZeroDetuning(NumericError):
    pass


class ResonantMode(NumericError):
    pass


class SingularMatrix(NumericError):
    def __init__(self, message, condition_number=float("inf")):
        super().__init__(message)
        self.condition_number = condition_number


class IncompleteMeasurements(NumericError):
    pass


class DegenerateSlope(NumericError):
    pass
