"""Exception types shared across the package."""


class Error(Exception):
    """Base class for every error this package raises on purpose."""


class ConfigError(Error):
    """A configuration value is invalid, missing, or names an unknown field."""


class ParseError(Error):
    """An input file is malformed; the message carries file and line number."""


class DataError(Error):
    """Dataset contents violate the expected schema or label space."""


class ShapeError(Error):
    """Operands have incompatible shapes."""


class UsageError(Error):
    """API misuse: backward on a non-scalar, a step without gradients, etc."""


class TrainingDiverged(Error):
    """The training loss became non-finite."""
