"""Exception types shared across the package."""


class RobexError(Exception):
    """Base class for all package errors."""


class InputError(RobexError):
    """Malformed or inconsistent input data (file parse, bad argument)."""


class ValidationError(RobexError):
    """A system failed invariant validation; carries the report."""

    def __init__(self, report):
        super().__init__("validation failed: " + "; ".join(report))
        self.report = list(report)


class BackendError(RobexError):
    """The optimization engine failed or returned a nonsensical status."""


class EnumerationTooLarge(RobexError):
    """Extreme-point enumeration would exceed the configured cap."""


class DualBoundTooTight(RobexError):
    """A dual variable hit its artificial bound; increase the bound and retry."""


class PreconditionError(RobexError):
    """An operation was called before its stated precondition was established."""


class IntegralityError(RobexError):
    """Rounded binaries violate a structural invariant of the plan."""


class NumericalStallError(RobexError):
    """The cut loop repeated an extreme point or the objective regressed."""
