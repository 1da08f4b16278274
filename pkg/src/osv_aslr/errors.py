"""Exception types shared across the simulator and the analysis tools."""


class AslrError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgument(AslrError, ValueError):
    pass


class OverlapError(AslrError):
    """A reservation intersects a region that is already mapped."""

    def __init__(self, start, length, existing):
        self.start = start
        self.length = length
        self.existing = existing
        super().__init__(
            f"[{start:#018x}, +{length:#x}) overlaps {existing}"
        )


class AddressSpaceExhausted(AslrError):
    pass


class EntropyExhausted(AslrError):
    pass


class LayoutFailure(AslrError):
    """Placement could not be completed (collisions or retries used up)."""


class InsufficientData(AslrError, ValueError):
    pass


class OutOfRegime(AslrError, ValueError):
    """The asymptotic KS critical value is only valid for n > 50."""


class ParseError(AslrError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
