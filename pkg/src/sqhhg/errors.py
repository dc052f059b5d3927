"""Exception hierarchy shared by all modules."""


class SqhhgError(Exception):
    """Base class for library errors."""


class InvalidInputError(SqhhgError, ValueError):
    """Argument outside the documented domain of an operation."""


class InvalidGridError(InvalidInputError):
    """Grid with non-positive spacing, non-monotone nodes or wrong shape."""


class InvalidAtomError(InvalidInputError):
    """Atom model with a non-positive ionization potential."""


class InconsistencyError(SqhhgError):
    """Moments that no physical state can produce."""


class NoSolutionError(SqhhgError):
    """No real classical trajectory (harmonic beyond the cutoff)."""


class BelowThresholdError(SqhhgError):
    """Harmonic photon energy does not exceed the ionization potential."""


class SingularMapError(SqhhgError):
    """Forward Jacobian determinant vanishes (fold or critical point)."""


class DegenerateResponseError(SqhhgError):
    """Response phase undefined, or phase sensitivity identically zero."""


class UnsupportedRepresentationError(SqhhgError):
    """Requested quasi-probability does not exist as a regular density."""


class ConfigError(SqhhgError):
    """Invalid run configuration; carries an optional line number."""

    def __init__(self, message, line=None, source=None):
        self.line = line
        self.source = source
        where = ""
        if source is not None or line is not None:
            where = f"{source or '<config>'}:{line if line is not None else '?'}: "
        super().__init__(where + message)
