"""Exception hierarchy for distortion-lab.

Every failure an operation can report is a subclass of DistortionLabError so
callers (the CLI in particular) can map them onto exit codes in one place.
"""
from typing import Any, Dict, List, Optional


class DistortionLabError(Exception):
    """Base class for all distortion-lab errors"""

    def __init__(self, message: str, **context: Any):
        super().__init__(message)
        self.message = message
        self.context: Dict[str, Any] = context

    def to_dict(self) -> Dict[str, Any]:
        return {"error": type(self).__name__, "message": self.message, **self.context}


# Growth-function errors
class NotConvex(DistortionLabError):
    """Difference quotients decrease where convexity was required"""


class PreconditionFailed(DistortionLabError):
    """An operation was called outside its stated preconditions"""


class Inconclusive(DistortionLabError):
    """The numeric evidence cannot certify a verdict (e.g. tabulated tails)"""


class NoTangent(DistortionLabError):
    """No touching point for the convex minorant on the sample range"""


# Field errors
class BoundaryCell(DistortionLabError):
    """Central differences requested on a boundary cell of a sampled grid"""

    def __init__(self, message: str, cells: Optional[List[Any]] = None):
        super().__init__(message, cells=cells or [])


class InfiniteDilatation(DistortionLabError):
    """Cells with K = inf where a finite dilatation is required"""

    def __init__(self, message: str, cells: Optional[List[Any]] = None):
        super().__init__(message, cells=cells or [])


# Functional and criteria errors
class CubeOutOfDomain(DistortionLabError):
    pass


class SphereOutOfDomain(DistortionLabError):
    pass


class DominationFailed(DistortionLabError):
    pass


class InvalidDominant(DistortionLabError):
    """Dominant takes values below 1 on its domain"""


# Construction errors
class ParamOutOfRange(DistortionLabError):
    pass


# Input / output surface
class GrowthSpecError(DistortionLabError):
    """Malformed growth-function JSON; `field` points at the offending key"""

    def __init__(self, message: str, field: str = ""):
        super().__init__(message, field=field)
        self.field = field

    def __str__(self) -> str:
        if self.field:
            return f"{self.field}: {self.message}"
        return self.message


class GridFormatError(DistortionLabError):
    pass


class ConfigError(DistortionLabError):
    pass


class InvariantBreach(DistortionLabError):
    """A certified invariant failed at run time (dispatcher mismatch etc.)"""
