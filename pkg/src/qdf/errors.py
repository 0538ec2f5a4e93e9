"""Exception hierarchy shared by every module."""


class QdfError(Exception):
    """Base class for all library errors."""


class DimensionError(QdfError, ValueError):
    """Operands have incompatible shapes."""


class InvariantError(QdfError, ValueError):
    """An object violates one of its defining invariants beyond tolerance."""


class InfeasibleError(QdfError):
    """A mathematically valid input for which the requested construction does not apply.

    The CLI maps this to exit code 2 so scripts can tell it apart from bugs.
    """

    def __init__(self, reason, detail=""):
        self.reason = reason
        self.detail = detail
        msg = reason if not detail else f"{reason}: {detail}"
        super().__init__(msg)


class DecompositionError(QdfError):
    """Extreme-point peeling could not finish (budget or numerical degeneracy)."""


class ParseError(QdfError, ValueError):
    """An input file is malformed or of the wrong kind."""
