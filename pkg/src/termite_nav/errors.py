"""Exception types shared across the package."""


class TermiteNavError(Exception):
    """Base class for all termite-nav errors."""


class MalformedFormat(TermiteNavError):
    """Input stream is not a valid binary (P5) PGM."""


class OutOfRangeDepth(TermiteNavError):
    """PGM maxval is not 255 (8-bit grayscale required)."""


class EmptyImage(TermiteNavError):
    """Image has no pixels."""


class OutOfRange(TermiteNavError):
    """Height difference outside [-255, 255]."""


class IndexOutOfBounds(TermiteNavError):
    """Cell index outside the grid."""


class UnknownCatValue(TermiteNavError):
    """Soil cat value missing from the category mapping."""


class DimensionMismatch(TermiteNavError):
    """Raster dimensions disagree."""


class PointOutsideGrid(TermiteNavError):
    """World point outside the terrain bounds."""


class DegenerateEndpoints(TermiteNavError):
    """Start and goal coincide."""


class EmptySwathe(TermiteNavError):
    """Swathe contains no cells."""


class StartNotNavigable(TermiteNavError):
    """Start point is not inside any nest cell."""


class GoalNotNavigable(TermiteNavError):
    """Goal point is not inside any nest cell."""


class NoPath(TermiteNavError):
    """No route exists over the navigability graph."""


class NoFreeSector(TermiteNavError):
    """Every polar sector is blocked; caller must stop and replan."""


class ScenarioError(TermiteNavError):
    """Scenario file is invalid."""
