"""Exception hierarchy shared across the toolkit."""


class IBodyError(Exception):
    """Base class for all toolkit errors."""


class ConfigurationError(IBodyError):
    """Unsupported or inconsistent configuration (grid kind, CLI flags, ...)."""


class DomainError(IBodyError):
    """An argument is outside the operation's domain (zero vector, t > 1, ...)."""


class NumericError(IBodyError):
    """Non-finite values or overflow encountered during a computation."""


class DegenerateSampleError(IBodyError):
    """A randomly drawn configuration is numerically degenerate; caller resamples."""


class ExtractionError(IBodyError):
    """Fiber extraction produced an inconsistent crossing pattern."""


class ReconstructionError(IBodyError):
    """Radial reconstruction failed (origin not interior to the fiber field)."""


class GeometryError(IBodyError):
    """A geometric precondition failed (multi-component fiber inside the disc, ...)."""


class UnsupportedDirectionError(IBodyError):
    """Axis-aligned direction passed to an operation that excludes it."""
