"""Exception types raised across the package."""


class HeightlabError(Exception):
    """Base class for all package errors."""


class ConfigurationError(HeightlabError, ValueError):
    """Unsupported lattice kind, malformed config value, bad parameter."""


class WindowTooSmallError(HeightlabError, ValueError):
    """A vertex set reaches the outer layer of the working window."""


class PotentialWindowError(HeightlabError, ValueError):
    """A potential was evaluated outside its certified window."""


class InvalidPotentialError(HeightlabError, ValueError):
    """The potential is not convex on its certified window."""


class EnumerationTooLargeError(HeightlabError, ValueError):
    """Exact enumeration would exceed the configured cap."""


class PreconditionError(HeightlabError, ValueError):
    """An operation was called outside its hypotheses."""
