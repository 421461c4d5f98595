"""Exception types raised by envkit."""


class EnvkitError(Exception):
    """Base class for all library errors."""


class ConfigError(EnvkitError, ValueError):
    pass


class ViolatedCFL(EnvkitError, ValueError):
    """Time step too large for the local light speed."""


class NonPositiveWarp(EnvkitError, ValueError):
    pass


class IndexOutOfRange(EnvkitError, IndexError):
    pass


class BoundaryRow(EnvkitError, ValueError):
    """No central-difference stencil is available at this row."""


class GridMismatch(EnvkitError, ValueError):
    pass


class EmptySeed(EnvkitError, ValueError):
    pass


class SNotContained(EnvkitError, ValueError):
    pass


class EndpointMismatch(EnvkitError, ValueError):
    pass


class NotTimelike(EnvkitError, ValueError):
    pass


class NonUniformGrid(EnvkitError, ValueError):
    """The field solver needs evenly spaced time rows."""


class SupportTooCloseToBoundary(EnvkitError, ValueError):
    pass


class SliceMismatch(EnvkitError, ValueError):
    pass


class TachyonicMode(EnvkitError, ValueError):
    """The frozen-time spatial operator has a non-positive eigenvalue."""


class ShapeMismatch(EnvkitError, ValueError):
    pass


class DominationViolated(EnvkitError, ValueError):
    pass


class EmptyFamily(EnvkitError, ValueError):
    pass


class DegenerateSpan(UserWarning):
    """Emitted when a generator family is numerically rank deficient."""
