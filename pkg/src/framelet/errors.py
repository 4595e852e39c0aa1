"""Exception hierarchy shared by every module in the package."""


class FrameletError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(FrameletError, ValueError):
    """Array shapes do not fit together."""


class InvalidDimensionError(FrameletError, ValueError):
    pass


class InvalidPatchError(FrameletError, ValueError):
    pass


class UnknownWaveletError(FrameletError, ValueError):
    pass


class NumericInputError(FrameletError, ValueError):
    """Input contains NaN or infinite entries."""


class NumericError(FrameletError, ArithmeticError):
    """A computation produced non-finite values."""


class ReconstructionError(FrameletError, ValueError):
    pass


class ConfigError(FrameletError, ValueError):
    pass


class ParameterError(FrameletError, ValueError):
    pass


class StateError(FrameletError, RuntimeError):
    pass


class CorruptModelError(FrameletError, ValueError):
    pass


class CalibrationError(FrameletError, ValueError):
    pass
