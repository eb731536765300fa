"""Exception types shared across the package."""


class WptError(Exception):
    """Base class for all errors raised by this package."""


class ContractViolationError(WptError):
    """An argument or intermediate value violates a documented precondition."""


class DegenerateInputError(WptError):
    """An all-zero (or effectively zero) waveform where a ratio is undefined."""


class SaturationInfeasibleError(WptError):
    """A target output amplitude at or beyond the amplifier saturation level."""


class InfeasibleConfigError(WptError):
    """A configuration whose constraint set admits no strictly feasible point."""
