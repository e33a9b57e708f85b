"""Exception types shared across ptbox."""


class PTBoxError(Exception):
    """Base class for all ptbox errors."""


class NoSignChange(PTBoxError, ValueError):
    pass


class MaxIterExceeded(PTBoxError, RuntimeError):
    pass


class DegenerateInput(PTBoxError, ValueError):
    pass


class DomainError(PTBoxError, ValueError):
    pass


class SingularMatching(PTBoxError, ValueError):
    """The matching conditions do not define a unique eigenfunction."""


class WindowTooSmall(PTBoxError, RuntimeError):
    """The first missing level is the highest tracked one."""


class NoBreakingFound(PTBoxError, RuntimeError):
    pass


class StartBroken(PTBoxError, RuntimeError):
    def __init__(self, message, xi=None):
        super().__init__(message)
        self.xi = xi


class InvalidModel(PTBoxError, ValueError):
    pass


class ConvergenceFailure(PTBoxError, RuntimeError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index
