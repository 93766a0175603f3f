"""Exception types raised across the package."""

from __future__ import annotations


class RieszCantorError(Exception):
    """Base class for all package errors."""


class SpecViolation(RieszCantorError, ValueError):
    """A Cantor construction breaks one of its admissibility constraints.

    ``kind`` is one of ``"ratio"``, ``"separation"``, ``"containment"`` or
    ``"parameter"``.
    """

    def __init__(self, kind: str, message: str, cubes=()):
        super().__init__(f"{kind}: {message}")
        self.kind = kind
        self.cubes = tuple(cubes)


class NonPositiveScale(RieszCantorError, ValueError):
    pass


class UnknownCube(RieszCantorError, KeyError):
    pass


class NotAnAncestor(RieszCantorError, ValueError):
    pass


class InconsistentPrescription(RieszCantorError, ValueError):
    pass


class NegativeMass(RieszCantorError, ValueError):
    pass


class ZeroDensity(RieszCantorError, ValueError):
    pass


class OverlappingStopFamily(RieszCantorError, ValueError):
    pass


class EmptyStopFamily(RieszCantorError, ValueError):
    pass


class SingularEvaluation(RieszCantorError, ZeroDivisionError):
    pass


class EmptyCloud(RieszCantorError, ValueError):
    pass


class InvalidOpening(RieszCantorError, ValueError):
    pass


class DepthZero(RieszCantorError, ValueError):
    """The tree has no proper subcubes, so no complement exists for a leaf."""


class MissingLeafValue(RieszCantorError, ValueError):
    pass


class NotARoot(RieszCantorError, ValueError):
    pass


class ZeroWolffEnergy(RieszCantorError, ZeroDivisionError):
    pass


class ZeroEnergy(RieszCantorError, ZeroDivisionError):
    pass


class OverlappingCubes(RieszCantorError, ValueError):
    pass


class ConfigError(RieszCantorError, ValueError):
    """Configuration could not be parsed or validated.

    ``where`` carries a line number or a dotted field path for diagnostics.
    """

    def __init__(self, message: str, where: str | None = None):
        super().__init__(f"{where}: {message}" if where else message)
        self.where = where
