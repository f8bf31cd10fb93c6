class RideHailError(Exception):
    """Base class for every error raised by the simulator and trainer."""


class PatternError(RideHailError):
    """Traffic pattern file is unreadable or breaks a pattern invariant."""


class ConfigError(RideHailError):
    """Run or training configuration is invalid."""


class InfeasibleActionError(RideHailError):
    """An atomic action (or positive probability) was given to an infeasible trip."""


class ShapeError(RideHailError):
    """Array dimensions do not match what a network or encoder expects."""


class StaleTapeError(RideHailError):
    """Backward pass requested on a tape recorded before the last parameter update."""


class NonFiniteError(RideHailError):
    """A loss, gradient or ratio became NaN or infinite."""


class CheckpointError(RideHailError):
    """Checkpoint file is missing or does not match the expected layout."""
