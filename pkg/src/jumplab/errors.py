"""Exception types shared across the lab."""


class LabError(Exception):
    """Base class for all jumplab errors."""


class DistanceUnreachable(LabError):
    """Two vertices of an explicit graph lie in different components."""


class WindowTooLarge(LabError):
    """A requested ball/window exceeds the configured enumeration cap."""


class DivergentTail(LabError):
    """An infinite kernel sum does not converge (alpha <= 0)."""


class TruncationBudgetExceeded(LabError):
    """Uniformization could not reach the requested tolerance within the term cap."""


class NoExit(LabError):
    """Expected exit time requested on a conservative (reflected) model."""


class InvalidData(LabError):
    """Negative initial or boundary data passed to a caloric solve."""


class NumericalFailure(LabError):
    """A linear solve failed or returned a non-finite result."""


class ExteriorOutOfRange(LabError):
    """A requested exterior vertex is not in the tracked annulus."""


class WindowUnconverged(LabError):
    """Doubling the window moved a probed quantity by more than the allowed margin."""


class ConfigError(LabError):
    """Malformed experiment configuration."""
