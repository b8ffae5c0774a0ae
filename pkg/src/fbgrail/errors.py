"""Exception hierarchy. CLI exit codes are attached to each family."""


class FbgRailError(Exception):
    exit_code = 1


class ConfigError(FbgRailError):
    exit_code = 2


class DataError(FbgRailError):
    """Malformed, missing or dimensionally inconsistent input data."""

    exit_code = 3


class DomainError(DataError, ValueError):
    """A value outside the operating domain of an operation."""


class InsufficientDataError(DataError):
    pass


class PlanarityError(DataError):
    pass


class FrameMismatchError(DataError):
    pass


class NotFoundError(DataError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class NumericalError(FbgRailError):
    exit_code = 4


class RankDeficiencyError(NumericalError):
    pass


class NoValidDataError(NumericalError):
    pass
