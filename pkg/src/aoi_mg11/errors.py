"""Exception types shared across the package."""


class AoiError(Exception):
    """Base class for all package errors."""


class ParameterDomainError(AoiError):
    """A parameter or evaluation point is outside its admissible domain."""


class PoleError(AoiError):
    """A rational expression was evaluated too close to one of its poles."""


class SingularSystemError(AoiError):
    """The flow-graph linear system is (numerically) singular."""


class DivergenceError(AoiError):
    """The geometric tail of a path sum does not converge."""


class InvariantViolationError(AoiError):
    """An internal dual-route self-check disagreed beyond tolerance; a defect."""


class InsufficientDataError(AoiError):
    """Not enough recorded samples to form the requested estimate."""


class ConditioningTooRareError(AoiError):
    """Rejection sampling accepted too few draws to be usable."""


class ConfigError(AoiError):
    """A run configuration file or CLI flag set failed validation."""
