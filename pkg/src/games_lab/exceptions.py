"""Exception hierarchy shared by the library and the command-line front end."""


class GamesLabError(Exception):
    """Base class for errors raised by games_lab."""


class DimensionMismatchError(GamesLabError, ValueError):
    pass


class InvalidStateError(GamesLabError, ValueError):
    """An operator or vector violates a state invariant beyond tolerance."""


class BudgetExceededError(GamesLabError):
    """A computation would exceed its configured size budget.

    Attributes:
        required: the size the computation would have needed.
        budget: the configured limit.
    """

    def __init__(self, message, required=None, budget=None):
        super().__init__(message)
        self.required = required
        self.budget = budget


class NonProductDistributionError(GamesLabError, ValueError):
    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


class UnsupportedArityError(GamesLabError, ValueError):
    pass


class ZeroProbabilityError(GamesLabError, ValueError):
    pass


class GameFormatError(GamesLabError, ValueError):
    pass
