class SPDCError(Exception):
    """
    Base class for every error raised on purpose by this package.
    """


class ConfigError(SPDCError, ValueError):
    """
    Invalid configuration, missing input file, or violated
    precondition.
    """


class DomainError(ConfigError):
    """
    Input outside a physical or tabulated domain.
    """


class NumericalError(SPDCError, ArithmeticError):
    """
    A numerical procedure did not produce a trustworthy result.
    """

    def __init__(self, message: str, *estimates: float) -> None:
        super().__init__(message)
        self.estimates = estimates
