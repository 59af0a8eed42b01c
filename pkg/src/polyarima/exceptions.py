"""Exception taxonomy shared across the package.

Every error raised by the library derives from PolyarimaError and carries a
``category`` string. The service layer maps categories onto HTTP payloads and
the CLI maps them onto exit codes, so the strings are part of the contract.
"""


class PolyarimaError(Exception):
    """Base class for all package errors."""

    category = "data"


class ParameterError(PolyarimaError):
    """An argument value is invalid (bad law parameter, bad order, ...)."""

    category = "parameter"


class LengthError(PolyarimaError):
    """The series is too short for the requested operation."""

    category = "length"


class RankError(PolyarimaError):
    """A design matrix is rank deficient (constant or degenerate series)."""

    category = "rank"


class DegeneracyError(PolyarimaError):
    """Sample moments are degenerate: zero variance or a nonpositive delta."""

    category = "degeneracy"


class AdmissibilityError(PolyarimaError):
    """Coefficients violate stationarity or invertibility."""

    category = "admissibility"


class DomainError(PolyarimaError):
    """Input lies outside the mathematical domain of the operation."""

    category = "domain"


class ConfigError(PolyarimaError):
    """An experiment configuration failed validation.

    ``path`` points at the offending entry, e.g. ``models[0].phi``.
    """

    category = "config"

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")
