"""Exception types shared across the package."""


class HFollowerError(Exception):
    """Base class for all package errors."""


class NonDissipative(HFollowerError):
    """Some eigenvalue is >= 0, so the drift operator is not strictly dissipative."""


class ZeroPriceOnDirection(HFollowerError):
    """The price has no (positive) mass on the control mode; unit-price normalization fails."""


class InvalidDiscount(HFollowerError):
    """Discount rate must be strictly positive."""


class NonlinearDirectionalDerivative(HFollowerError):
    """Cost cannot certify an affine directional derivative along the control direction."""


class DimensionMismatch(HFollowerError):
    pass


class GridMismatch(HFollowerError):
    pass


class NegativeIncrement(HFollowerError):
    """A control increment leaves the nonnegative cone."""


class PriceFloorViolated(HFollowerError):
    """A nonzero increment has nonpositive price mass, so it cannot be intensity-normalized."""


class InadmissiblePolicy(HFollowerError):
    """A policy produced a negative intensity increment."""


class NonFiniteSample(HFollowerError):
    pass


class UnsupportedCostKind(HFollowerError):
    pass


class NoConvergence(HFollowerError):
    """Iterative solver hit its iteration cap before reaching tolerance."""


class DegenerateNoise(HFollowerError):
    """The controlled mode carries no noise; the 1-D solver requires nondegeneracy."""


class IllConditionedRegression(HFollowerError):
    """Regression design stayed ill-conditioned even after degree reduction."""


class NoBoundary(HFollowerError):
    """No free boundary interior to the grid."""


class StepTooSmall(HFollowerError):
    """Finite-difference step is below the Monte Carlo noise floor."""


class BudgetTooSmall(HFollowerError):
    """Monte Carlo budget is below the minimum of every requested check."""


class InvalidParams(HFollowerError):
    pass
