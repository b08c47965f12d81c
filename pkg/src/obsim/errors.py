"""Exception types raised across the package."""


class ObsimError(Exception):
    """Base class for simulator errors."""


class InvalidArgumentError(ObsimError, ValueError):
    pass


class DegenerateStateError(ObsimError, ValueError):
    """A state with zero norm was asked for an expectation value."""


class StepSizeError(ObsimError, RuntimeError):
    """The no-jump integrator increased the norm: the step is too large."""


class DomainError(ObsimError, ValueError):
    """Parameters lie outside the domain where an operation is defined."""


class CapabilityError(ObsimError, RuntimeError):
    """The requested evaluation path cannot handle the input size."""
