"""Exception hierarchy.  Every error raised deliberately by the package
derives from :class:`InvisibleBodyError`."""


class InvisibleBodyError(Exception):
    pass


class DegenerateConic(InvisibleBodyError):
    pass


class OffCurve(InvisibleBodyError):
    pass


class OutOfExtent(InvisibleBodyError):
    pass


class InvalidConfiguration(InvisibleBodyError):
    """Raised with the list of violated constraint names."""

    def __init__(self, constraints, message=None):
        self.constraints = list(constraints)
        super().__init__(message or "invalid configuration: " + ", ".join(self.constraints))


class ArcClippingFailed(InvalidConfiguration):
    pass


class RailExhausted(InvalidConfiguration):
    pass


class DomainError(InvisibleBodyError):
    pass


class NoIntersection(InvisibleBodyError):
    pass


class InsideBody(InvisibleBodyError):
    pass


class NotExited(InvisibleBodyError):
    pass


class OutsideRevolvedRange(InvisibleBodyError):
    pass
