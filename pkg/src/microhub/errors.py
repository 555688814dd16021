"""Exception types shared across the package."""


class MicrohubError(Exception):
    pass


class InvalidArgument(MicrohubError, ValueError):
    pass


class UnstableSystem(MicrohubError):
    """Raised when a zone's utilization reaches or exceeds one."""

    def __init__(self, rho, message=None):
        self.rho = float(rho)
        super().__init__(message or f"unstable system: utilization rho={self.rho:.6g} >= 1")


class InsufficientData(MicrohubError):
    pass


class NoFeasibleDesign(MicrohubError):
    def __init__(self, min_rho, message=None):
        self.min_rho = float(min_rho)
        super().__init__(
            message or f"no feasible (K, n) in the search grid; minimum rho found = {self.min_rho:.6g}"
        )
