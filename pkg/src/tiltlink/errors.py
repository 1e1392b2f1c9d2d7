"""Exception types raised across the package."""


class SingularForm(ValueError):
    """The robot form cannot hover: the hover allocation system is singular."""


class RankDeficient(ValueError):
    """The rotational allocation matrix has rank below three."""


class DegenerateConvex(ValueError):
    """All torque generators are pairwise parallel; no face normal exists."""


class NotStabilizable(RuntimeError):
    """Riccati iteration failed to produce a stabilizing gain."""


class DegenerateForce(ValueError):
    """Desired force too small to extract a desired attitude from."""


class StaleMeasurement(ValueError):
    """Measurement predates the oldest node held in the filter buffer."""


class UnknownFrame(KeyError):
    """No mount transform is registered for the requested sensor."""


class NonFiniteState(FloatingPointError):
    """The simulated state diverged to NaN/inf."""

    def __init__(self, message: str, t: float | None = None):
        super().__init__(message)
        self.t = t


class ScenarioConfigError(ValueError):
    """A scenario or configuration file is malformed or inconsistent."""


class NoReference(ValueError):
    """Geodetic conversion requested before a reference point was set."""


class DegenerateField(ValueError):
    """Accelerometer or magnetometer vector too weak to correct attitude."""
