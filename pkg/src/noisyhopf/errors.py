"""Exception hierarchy shared by all modules.

Each error carries a distinct process exit code so the command line front
end can map failures without inspecting messages.
"""


class NoisyHopfError(Exception):
    exit_code = 1


class UsageError(NoisyHopfError, ValueError):
    exit_code = 2


class InvalidStep(UsageError):
    pass


class NonCommensurateDelay(UsageError):
    pass


class MissingParameter(UsageError):
    pass


class UnknownVariant(UsageError):
    pass


class DegenerateGain(UsageError):
    pass


class Unreachable(UsageError):
    pass


class LengthMismatch(UsageError):
    pass


class ResolutionTooCoarse(UsageError):
    pass


class WindowTooShort(UsageError):
    pass


class NoConvergence(NoisyHopfError, ArithmeticError):
    exit_code = 3


class NoOnsetInRange(NoisyHopfError):
    exit_code = 3


class Diverged(NoisyHopfError, ArithmeticError):
    """Trajectory left the region |u| <= 1e6 (or produced a NaN)."""

    exit_code = 4

    def __init__(self, message, trial=None, step=None):
        super().__init__(message)
        self.trial = trial
        self.step = step
