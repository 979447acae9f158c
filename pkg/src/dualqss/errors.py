"""Exception types shared across the package."""


class DualQssError(Exception):
    """Base class for all package errors."""


class NonConvergence(DualQssError):
    def __init__(self, iterations, residual, where="newton"):
        self.iterations = iterations
        self.residual = residual
        super().__init__(
            f"{where}: no convergence after {iterations} iterations "
            f"(residual {residual:.3e})"
        )


class SingularJacobian(DualQssError):
    pass


class NonFiniteValue(DualQssError):
    pass


class EmptySeries(DualQssError):
    pass


class ScheduleError(DualQssError):
    pass


class DataError(DualQssError):
    pass


class PowerFlowError(DualQssError):
    pass


class TopologyError(DualQssError):
    pass


class GridError(DualQssError):
    pass


class NotAdaptive(DualQssError):
    pass
