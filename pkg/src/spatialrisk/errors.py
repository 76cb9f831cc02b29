class SpatialRiskError(Exception):
    """Base class of the errors raised when a risk computation cannot be carried out."""


class ParameterError(SpatialRiskError, ValueError):
    """A model, region or query parameter lies outside its range of validity."""


class InternalConsistencyError(SpatialRiskError):
    """A computed quantity violates a property that holds by proof (e.g. Θ outside [1, 2])."""


class QuadratureError(SpatialRiskError):
    """An adaptive quadrature did not reach the requested tolerance within its budget."""


class IntegrabilityError(SpatialRiskError):
    """The integral defining σ² diverges for the requested model."""


class DegenerateModelError(SpatialRiskError):
    """The model is a degenerate fixture for which the requested constant is undefined."""


class InvalidThresholdError(SpatialRiskError, ValueError):
    """The GEV threshold transform leaves the domain u > 0."""


class NonPositiveDefiniteError(SpatialRiskError):
    """A covariance matrix or circulant embedding is not positive semi-definite."""


class TruncationBudgetError(SpatialRiskError):
    """A spectral simulation exhausted its storm budget before its stopping rule fired."""


class InsufficientGridError(SpatialRiskError, ValueError):
    """A λ grid is too short or too narrow for the requested fit."""


class ConfigError(SpatialRiskError, ValueError):
    """A command-line or configuration-file value is invalid."""
