"""Exception hierarchy shared by all modules."""


class ABError(Exception):
    """Base class for errors raised by abeigen."""


class SingularPointError(ABError, ValueError):
    """A field was evaluated exactly at the pole."""


class OutOfRangeError(ABError, ValueError):
    pass


class GeometryError(ABError, ValueError):
    pass


class MeshQualityError(ABError):
    pass


class ConsistencyError(ABError, ValueError):
    """Mesh, pencil and parameters disagree (e.g. pole not at the mesh pole)."""


class UnsupportedError(ABError, ValueError):
    pass


class NonConvergenceError(ABError):
    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class AccuracyError(ABError):
    pass


class FitError(ABError):
    pass


class ContractError(ABError, ValueError):
    pass


class KRealityError(ABError):
    pass


class ConfigError(ABError, ValueError):
    pass
