"""Exception types shared across the package.

Every error raised by sdri derives from SdriError so callers (and the CLI
exit-code mapping) can distinguish our failures from genuine bugs.
"""


class SdriError(Exception):
    """Base class for all sdri errors."""


class DegenerateGeometry(SdriError):
    """Polygon with fewer than 3 vertices, near-zero area, or self-intersection."""


class OverlappingInteriors(SdriError):
    """Container and substrate interiors overlap with positive area."""


class UnclassifiableArc(SdriError):
    """A boundary arc matched none of the surface-tension classes."""


class InvariantViolation(SdriError):
    """A FreeCrystal failed its structural invariants (tags, containment, budget)."""


class HypothesisViolated(SdriError):
    """An anisotropy/adhesion field failed the norm or adhesion-bound checks.

    Carries the offending location and the signed margin of the violated
    inequality (negative = violated by that much).
    """

    def __init__(self, message, location=None, margin=None):
        super().__init__(message)
        self.location = location
        self.margin = margin


class MeshFailure(SdriError):
    """Triangulation could not produce a valid conforming mesh."""


class SingularSystem(SdriError):
    """The gauged elastic system is singular (an unconstrained rigid mode remains)."""


class NonConvergence(SdriError):
    """Iterative linear solve exceeded its iteration budget."""


class UnknownPreset(SdriError):
    """Requested preset name is not one of the built-in scenarios."""


class NoTriplePoint(SdriError):
    """Contact-angle measurement found no substrate contact (detached droplet)."""


class ParseError(SdriError):
    """Config or geometry file is not syntactically valid."""


class ValidationError(SdriError):
    """Config parsed but one or more fields violate their allowed ranges.

    ``violations`` lists every offending field, not just the first.
    """

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))
