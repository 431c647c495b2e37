"""Exception types shared across the package."""


class NaifsError(Exception):
    """Base class for all package errors."""


class InputError(NaifsError, ValueError):
    """Invalid argument or malformed configuration."""


class UnsupportedCapabilityError(NaifsError):
    """A map was asked for a capability it does not provide (derivative, branches)."""


class NonDifferentiableError(UnsupportedCapabilityError):
    """Derivative requested at a point where the map is not differentiable."""


class PreconditionError(NaifsError):
    """A stated precondition fails (e.g. fixed-scale pressure without a certificate)."""


class SaturationError(NaifsError):
    """Every fit window is saturated; the grid is too coarse for the requested scales."""


class ResolutionError(NaifsError):
    """A search failed at the current grid/scale resolution."""


class UnderResolvedError(ResolutionError):
    """A local probe region contains too few grid points to be meaningful."""
