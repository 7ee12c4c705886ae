"""Exception hierarchy shared by all modules.

Exit-code mapping used by the CLI: UsageError -> 1, NumericalError -> 2,
property-suite failures -> 3 (no exception; the verify subcommand returns it).
"""


class ContactKamError(Exception):
    """Base class for all library errors."""


class UsageError(ContactKamError):
    """Caller violated a precondition (bad arguments, mismatched grids)."""


class ConfigError(UsageError):
    """Configuration file is missing, unparseable, or invalid."""


class NumericalError(ContactKamError):
    """A computation produced non-finite or inconsistent results."""


class BlowupError(NumericalError):
    """Field or trajectory exceeded the blowup guard."""

    def __init__(self, message, t=None, sup=None, last_good=None):
        super().__init__(message)
        self.t = t
        self.sup = sup
        self.last_good = last_good


class ConvergenceError(NumericalError):
    """Fixed-point iteration hit its time horizon before converging."""

    def __init__(self, message, rate=None, t=None):
        super().__init__(message)
        self.rate = rate
        self.t = t


class ConsistencyError(NumericalError):
    """Computed data violates an identity it should satisfy (e.g. barrier < 0)."""


class ToleranceError(NumericalError):
    """A tolerance-defined set came out empty; a larger tolerance or finer grid is needed."""
