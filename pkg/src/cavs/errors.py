"""
Exception types raised by cavs. Everything derives from ValueError or
RuntimeError so callers that only know the builtins still catch them.
"""


class ShapeError(ValueError):
    """A tensor did not have the shape an operation requires."""


class DatasetError(ValueError):
    """A clip directory or image on disk is malformed."""


class CheckpointError(ValueError):
    """Base class for checkpoint read/write failures."""


class BadMagicError(CheckpointError):
    pass


class UnsupportedVersionError(CheckpointError):
    pass


class TruncatedCheckpointError(CheckpointError):
    pass


class CheckpointShapeError(CheckpointError):
    pass


class ConfigMismatchError(CheckpointError):
    """A checkpoint was built for a different configuration than requested."""


class NonFiniteLossError(RuntimeError):
    def __init__(self, step, value):
        super().__init__("non-finite loss {} at step {}".format(value, step))
        self.step = step
        self.value = value
