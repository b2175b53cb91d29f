"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: UsageError -> 2, everything else that
escapes a run -> 3.
"""


class UsageError(ValueError):
    """Caller passed inconsistent arguments (wrong space, bad spec string, ...)."""


class DomainError(ValueError):
    """Mathematically valid call outside an operation's domain (cut locus, ...)."""


class ResourceError(RuntimeError):
    """Problem size exceeds a configured cap."""


class NumericalError(RuntimeError):
    """An iterative numerical procedure failed to reach its target."""
