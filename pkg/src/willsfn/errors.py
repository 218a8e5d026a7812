"""Exception types raised across the package."""


class WillsError(Exception):
    """Base class for every error raised by willsfn."""


class BodySpecError(WillsError, ValueError):
    """A body description is malformed. ``path`` points at the offending field."""

    def __init__(self, message, path="$"):
        super().__init__(f"{path}: {message}")
        self.path = path


class UnboundedBody(WillsError):
    pass


class OriginNotInterior(WillsError):
    pass


class ConvergenceFailure(WillsError):
    pass


class EmptySection(WillsError):
    pass


class UnsupportedSection(WillsError):
    pass


class UnsupportedOperation(WillsError):
    pass


class IllConditionedFit(WillsError):
    pass


class DivergentMoment(WillsError):
    pass


class TruncationDominates(WillsError):
    pass


class UnboundedSupport(WillsError):
    pass


class UnknownCheck(WillsError, KeyError):
    pass


class MissingInput(WillsError, ValueError):
    pass


class SingularSystem(WillsError):
    pass
