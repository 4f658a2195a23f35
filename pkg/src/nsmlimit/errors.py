"""Exception types shared across the package."""


class SimulationError(Exception):
    """Base class for all solver-level failures."""


class VacuumError(SimulationError):
    """Density reached zero or became negative."""


class ConstraintDriftError(SimulationError):
    """A divergence constraint (div E = 0 or div B = 0) drifted beyond tolerance."""


class BlowUpError(SimulationError):
    """NaN/Inf detected during time stepping."""

    def __init__(self, time: float, message: str | None = None):
        self.time = time
        super().__init__(message or f"blow-up detected at t={time:g}")


class GridMismatchError(SimulationError):
    """Fields defined on different grids were combined."""


class InactiveAxisError(SimulationError):
    """A differential operator was requested along a collapsed grid axis."""


class SnapshotSpacingError(SimulationError):
    """Snapshots handed to a time-centered audit are not uniformly spaced."""


class ConfigError(Exception):
    """Malformed or inconsistent run configuration."""
