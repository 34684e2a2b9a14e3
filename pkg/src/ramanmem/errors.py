"""Exception hierarchy shared by all modules."""


class RamanMemError(Exception):
    """Base class for every error raised by the package."""


class ConfigurationError(RamanMemError, ValueError):
    """A parameter, precondition or cross-field constraint is violated.

    ``issues`` lists every violation found, so callers can report them all at
    once instead of failing on the first one.
    """

    def __init__(self, issues):
        if isinstance(issues, str):
            issues = [issues]
        self.issues = list(issues)
        super().__init__("; ".join(self.issues))


class InfeasibleGeometryError(ConfigurationError):
    pass


class ResolutionError(RamanMemError):
    """A numerical grid is too coarse for the requested accuracy."""


class ValidityError(RamanMemError):
    """The state left the regime in which the model equations hold."""


class UndefinedQuantityError(RamanMemError, ValueError):
    """A requested quantity is undefined for the given input (e.g. 0/0)."""


class ComparisonError(RamanMemError, ValueError):
    """Simulation output and analytic prediction cannot be compared."""
