"""Exception taxonomy shared by all mixgeo modules."""


class MixgeoError(Exception):
    """Base class for all library errors."""


class DomainViolation(MixgeoError):
    """An atom or evaluation point lies outside its admissible region."""


class NumericError(MixgeoError):
    """A computation produced a non-finite or otherwise invalid value."""


class CapabilityError(MixgeoError):
    """The requested derivative order exceeds the family's smoothness."""


class ConfigError(MixgeoError):
    """Invalid or inconsistent configuration."""


class ShapeError(MixgeoError):
    """Mismatched grids or array shapes."""


class DegenerateInputError(MixgeoError):
    """Input is degenerate for the requested operation (e.g. f == f*)."""


class DependencyError(MixgeoError):
    """A required precomputed object (envelope, neighborhood) is missing."""


class ScaleError(MixgeoError):
    """Bracketing scale parameters violate their preconditions."""


class CertificateError(MixgeoError):
    """A bracket generator failed its certified size or count guarantee."""


class PreconditionError(MixgeoError):
    """An operation's mathematical precondition does not hold."""


class CapExceeded(MixgeoError):
    """A hard resource cap (bracket count, attempts) was exceeded."""
