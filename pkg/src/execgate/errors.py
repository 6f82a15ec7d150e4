"""Exception types raised across the package."""


class ExecGateError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(ExecGateError, ValueError):
    """A scalar parameter is outside its admissible range."""


class InvalidInputError(ExecGateError, ValueError):
    """Malformed or mismatched array input."""


class AmbiguousAxisError(ExecGateError, ValueError):
    """Rotation angle is pi, so the rotation axis (and log) is not unique."""


class BehindCameraError(ExecGateError, ValueError):
    """A point has non-positive depth in the camera frame."""

    def __init__(self, index: int, depth: float):
        super().__init__(f"point {index} is behind the camera (z = {depth:.6g} mm)")
        self.index = index
        self.depth = depth


class InsufficientPointsError(ExecGateError, ValueError):
    pass


class DegenerateConfigurationError(ExecGateError, ValueError):
    pass


class InsufficientTraceError(ExecGateError, ValueError):
    pass


class ScenarioInfeasibleError(ExecGateError, ValueError):
    pass


class EmptyInputError(ExecGateError, ValueError):
    pass


class ConfigError(ExecGateError, ValueError):
    """Invalid run configuration; ``field`` names the offending key."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
