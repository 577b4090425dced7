"""Exception types raised across the toolkit."""


class TVIError(Exception):
    """Base class for all toolkit errors."""


class NoIntersection(TVIError):
    """Two isolines never meet on the search domain."""


class UnboundedSolution(TVIError):
    """The isolines coincide along a half-line (linear attenuation, contact outside the pair)."""


class EmptyRegion(TVIError):
    """Readings are mutually inconsistent beyond the noise band."""


class ComplexityLimit(TVIError):
    """Too many simultaneous contacts for the brute-force oracle."""


class OutOfBounds(TVIError):
    """A scan point lies outside the sensing surface."""


class InsufficientCoverage(TVIError):
    """Too few level crossings to build an isoline."""


class DegenerateFit(TVIError):
    """Isoline samples do not identify the attenuation exponent."""


class Divergence(TVIError):
    """Training produced a non-finite validation loss."""


class NonConvergent(TVIError):
    """Too many Monte-Carlo trials failed to converge."""


class InfiniteOmega(TVIError, ValueError):
    """Position error is zero, so the super-resolution factor is unbounded."""
