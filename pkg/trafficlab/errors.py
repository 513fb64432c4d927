"""
Error types
Every failure trafficlab raises on purpose derives from TrafficLabError so
the CLI can report it and mark the run as failed.
"""


class TrafficLabError(Exception):
    """Base class for all trafficlab errors."""


class ConfigError(TrafficLabError):
    """A preset, trainer or experiment file is missing or malformed."""


class InvalidParameter(TrafficLabError, ValueError):
    """A parameter is outside its documented range."""


# ------------------------------------------------------------------ #
#  Network
# ------------------------------------------------------------------ #

class NetworkError(TrafficLabError):
    pass


class CoincidentWaypoints(NetworkError):
    def __init__(self, container_id, index):
        super().__init__(
            f"container {container_id}: waypoints {index} and {index + 1} coincide"
        )
        self.container_id = container_id
        self.index = index


class InvalidLayoutIndex(NetworkError, ValueError):
    pass


class InvalidLayout(NetworkError):
    pass


class DeadEnd(NetworkError):
    """A vehicle reached a container without continuation links."""

    def __init__(self, container_id):
        super().__init__(f"container {container_id} has no next ways")
        self.container_id = container_id


# ------------------------------------------------------------------ #
#  Simulation
# ------------------------------------------------------------------ #

class DegenerateTarget(TrafficLabError):
    pass


class OutOfRange(TrafficLabError, ValueError):
    pass


class ZeroDistance(TrafficLabError):
    """Per-mile values are undefined for a vehicle that never moved."""

    def __init__(self, fuel_gallons=0.0, co2_grams=0.0):
        super().__init__("distance_total is 0; per-mile values are undefined")
        self.fuel_gallons = fuel_gallons
        self.co2_grams = co2_grams


class MetricsWriteError(TrafficLabError):
    def __init__(self, path, cause):
        super().__init__(f"could not write {path}: {cause}")
        self.path = path


class EpisodeFinished(TrafficLabError):
    pass


# ------------------------------------------------------------------ #
#  Training / harness
# ------------------------------------------------------------------ #

class LengthMismatch(TrafficLabError, ValueError):
    pass


class NonFiniteLoss(TrafficLabError):
    def __init__(self, diagnostics):
        super().__init__(f"non-finite loss during PPO update: {diagnostics}")
        self.diagnostics = diagnostics


class CheckpointError(TrafficLabError):
    pass


class SchemaMismatch(TrafficLabError):
    pass
