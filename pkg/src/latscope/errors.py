"""Exception types. `exit_code` is what the command-line front end returns."""


class LatscopeError(Exception):
    exit_code = 2


class InvalidInput(LatscopeError):
    pass


class NotExpanding(LatscopeError):
    pass


class RhoTooSmall(LatscopeError):
    pass


class ThetaOutOfRange(LatscopeError):
    pass


class EmptyBody(LatscopeError):
    pass


class NoExpansionOnF(LatscopeError):
    pass


class EmptyBox(LatscopeError):
    pass


class WindowTooSmall(LatscopeError):
    pass


# budget / precision failures
class ConfluentSpectrum(LatscopeError):
    exit_code = 3


class IllConditioned(LatscopeError):
    exit_code = 3


class Overflow(LatscopeError):
    exit_code = 3


class SearchBudgetExceeded(LatscopeError):
    exit_code = 3
