"""Exception types shared across the package."""


class CfmmError(Exception):
    """Base class for every error raised by this package."""


class DomainError(CfmmError):
    """An input lies outside the mathematical domain of the operation."""


class DimensionError(CfmmError):
    """Vector or matrix sizes do not match the pool's asset count."""


class RejectedTrade(CfmmError):
    """A trade failed the acceptance check; carries the diagnostic report."""

    def __init__(self, report):
        super().__init__(f"trade rejected: {report.reason}")
        self.report = report


class InvalidLiquidityBasket(CfmmError):
    """The proposed reserve change does not preserve asset prices."""


class InsufficientShare(CfmmError):
    """A liquidity removal would drive the provider's weight negative."""


class NegativeReserves(CfmmError):
    """A removal asks for more of an asset than the pool holds."""


class SlippageExceeded(CfmmError):
    """The receive basket had to be scaled below the agreed threshold."""

    def __init__(self, scale, threshold):
        super().__init__(f"executable scale {scale:.6g} below threshold {threshold:.6g}")
        self.scale = scale
        self.threshold = threshold


class NoValidScale(CfmmError):
    """No scaling of the receive basket balances the trade within the reserves."""


class Infeasible(CfmmError):
    """The requested quantity cannot be served at any input amount."""


class ConvergenceError(CfmmError):
    """A root search failed to bracket or converge."""
