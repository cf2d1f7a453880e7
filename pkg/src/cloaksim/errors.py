"""Exception hierarchy shared across the package.

PreconditionError maps to CLI exit code 2, NumericalError to 3. I/O problems
reuse the builtin OSError family (exit code 4).
"""


class CloakSimError(Exception):
    """Base class for package errors."""


class PreconditionError(CloakSimError):
    """Invalid input: bad geometry parameters, malformed config, wrong ranges."""


class NumericalError(CloakSimError):
    """A solver failed to reach its tolerance or produced unusable numbers."""
