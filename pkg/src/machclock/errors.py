"""Exception types raised by the machclock package."""


class MachClockError(Exception):
    """Base class for all package errors."""


class DimensionError(MachClockError):
    """Invalid Hilbert-space dimension (wrong size, too small, over the cap)."""


class SpaceMismatchError(MachClockError):
    """Operators or states defined on different Hilbert spaces were combined."""


class StateValidationError(MachClockError):
    """A density matrix failed Hermiticity, trace or positivity checks."""


class CutoffError(MachClockError):
    """A Fock-space cutoff leaves more than the allowed thermal tail mass."""


class StepSizeError(MachClockError):
    """A requested integration step violates a solver precondition."""


class NumericalAbortError(MachClockError):
    """An integration run violated a runtime invariant (positivity, trace)."""


class ConfigError(MachClockError):
    """An experiment configuration is missing keys or out of range."""
