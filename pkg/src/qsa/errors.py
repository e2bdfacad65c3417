"""Exception types raised across the package."""


class QSAError(Exception):
    """Base class for all errors raised by qsa."""


class DimensionMismatch(QSAError, ValueError):
    pass


class NotADensityMatrix(QSAError, ValueError):
    pass


class BadRank(QSAError, ValueError):
    pass


class POutOfRange(QSAError, ValueError):
    pass


class NotAnIsometry(QSAError, ValueError):
    pass


class RankMismatch(QSAError, ValueError):
    pass


class BasisNotBalanced(QSAError, ValueError):
    pass


class NotAChannel(QSAError, ValueError):
    """Kraus family fails trace preservation or complete positivity."""


class ConfigInvalid(QSAError, ValueError):
    """Invalid run configuration. ``field`` names the offending option."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")
