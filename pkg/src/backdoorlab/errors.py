"""Exception hierarchy shared by every subpackage.

The CLI maps each family onto its own exit code, so new errors should
subclass one of the three roots below rather than ``Exception``.
"""


class BackdoorLabError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(BackdoorLabError, ValueError):
    """Invalid configuration or argument values."""


class DataError(BackdoorLabError, ValueError):
    """Malformed or inconsistent input data."""


class NumericalError(BackdoorLabError, ArithmeticError):
    """Non-finite values appeared during training or evaluation."""

    def __init__(self, message, epoch=None, batch=None):
        super().__init__(message)
        self.epoch = epoch
        self.batch = batch


class ShapeError(BackdoorLabError, ValueError):
    """Tensor shapes do not fit together.

    ``layer`` is the index of the offending layer inside a network spec
    (``None`` when the op was called outside a network), ``expected`` and
    ``got`` are the mismatching dimensions.
    """

    def __init__(self, message, layer=None, expected=None, got=None):
        if layer is not None:
            message = f"layer {layer}: {message}"
        super().__init__(message)
        self.layer = layer
        self.expected = expected
        self.got = got


class FormatError(DataError):
    """A binary file does not follow its container format.

    ``offset`` is the byte position where parsing stopped making sense.
    """

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class BadMagicError(FormatError):
    pass


class TruncatedError(FormatError):
    pass


class DimensionMismatchError(FormatError):
    pass
