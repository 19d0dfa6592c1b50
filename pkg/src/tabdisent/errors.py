"""Exception types shared across the package.

Everything derives from ValueError or RuntimeError so callers that do not
care about the fine distinctions can catch the built-ins.
"""


class ShapeMismatchError(ValueError):
    """Operand shapes are incompatible with the requested operation."""


class NonFiniteError(ValueError):
    """A tensor that must be finite contains NaN or Inf."""


class DegenerateInputError(ValueError):
    """Input is structurally valid but numerically degenerate (e.g. zero norm)."""


class GradientMissingError(RuntimeError):
    """An optimizer step was asked to consume a gradient that is not there."""


class ConfigError(ValueError):
    """A configuration value violates its contract."""


class ParseError(ValueError):
    """A data file could not be parsed; message carries the location."""


class DatasetError(ValueError):
    """A dataset fails validation against its registry entry."""


class TrainingDivergedError(RuntimeError):
    """The loss left the finite domain during training."""
