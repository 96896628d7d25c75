"""Exception hierarchy.

Every error raised by the library derives from :class:`TensorkitError`.
The CLI maps the three families below onto exit codes:

* :class:`ArgumentError` -> 2 (bad parameters / usage)
* data and validation errors -> 3
* :class:`NumericError` -> 4
"""


class TensorkitError(Exception):
    """Base class for all library errors."""


class ArgumentError(TensorkitError, ValueError):
    """Invalid parameter value (rank, tolerance, sample size, ...)."""


class DimensionError(TensorkitError, ValueError):
    """Shapes are inconsistent."""


class ModeIndexError(TensorkitError, IndexError):
    """Mode index outside ``[0, order)``."""


class StateError(TensorkitError, ValueError):
    """Operation not allowed in the tensor's current state."""


class FormError(TensorkitError, ValueError):
    """An efficient representation violates its structural invariants."""


class DataError(TensorkitError, ValueError):
    """Training or fitting data is unusable (e.g. a single class)."""


class NumericError(TensorkitError, ArithmeticError):
    """Numerical failure: non-finite input, non-PD matrix, singular update."""


class FormatError(TensorkitError, ValueError):
    """A file could not be parsed."""


class ValidationError(TensorkitError, ValueError):
    """A parsed file violates an invariant.  ``field`` names the culprit."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class VersionError(TensorkitError, ValueError):
    """Unsupported ``format_version``."""
