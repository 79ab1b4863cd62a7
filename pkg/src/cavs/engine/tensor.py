"""
Value types of the engine. Tensors are plain numpy arrays in C order; this
module adds the default-precision switch, the convolution geometry record and
the gradient pair returned by every backward pass.
"""
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from ..errors import ShapeError

_default_dtype = np.float32


def default_dtype():
    return _default_dtype


def set_default_dtype(dtype):
    global _default_dtype
    dtype = np.dtype(dtype).type
    if dtype not in (np.float32, np.float64):
        raise ValueError("only float32 and float64 are supported, got {}".format(dtype))
    _default_dtype = dtype


@contextmanager
def precision(dtype):
    """
    Temporarily switches the default dtype, e.g. ``with precision(np.float64):``
    for gradient checks.
    """
    previous = _default_dtype
    set_default_dtype(dtype)
    try:
        yield
    finally:
        set_default_dtype(previous)


def as_tensor(data, dtype=None):
    """
    Converts to a C-contiguous array of the given (or default) float dtype.
    Rejects scalars and zero-sized dims.
    """
    array = np.ascontiguousarray(data, dtype=dtype or _default_dtype)
    if array.ndim == 0:
        raise ShapeError("tensors need at least one dim")
    if any(d < 1 for d in array.shape):
        raise ShapeError("all dims must be >= 1, got shape {}".format(array.shape))
    return array


def _expand(value, ndim, name):
    if np.isscalar(value):
        return (int(value),) * ndim
    value = tuple(int(v) for v in value)
    if len(value) != ndim:
        raise ValueError("{} needs {} components, got {}".format(name, ndim, value))
    return value


@dataclass(frozen=True)
class ConvSpec:
    """
    Kernel geometry per spatial axis. 3D ops carry a leading temporal component.
    ``output_padding`` is only read by transposed convolutions.
    """
    stride: Tuple[int, ...] = (1, 1)
    padding: Tuple[int, ...] = (0, 0)
    dilation: Tuple[int, ...] = (1, 1)
    output_padding: Tuple[int, ...] = (0, 0)

    def __post_init__(self):
        n = len(self.stride)
        if not (len(self.padding) == len(self.dilation) == len(self.output_padding) == n):
            raise ValueError("ConvSpec components must all have {} entries".format(n))
        if min(self.stride) < 1:
            raise ValueError("stride must be >= 1, got {}".format(self.stride))
        if min(self.dilation) < 1:
            raise ValueError("dilation must be >= 1, got {}".format(self.dilation))
        if min(self.padding) < 0:
            raise ValueError("padding must be >= 0, got {}".format(self.padding))
        if min(self.output_padding) < 0:
            raise ValueError("output_padding must be >= 0, got {}".format(self.output_padding))
        for op, s in zip(self.output_padding, self.stride):
            if op and op >= s:
                raise ValueError("output_padding must be smaller than the stride, got {}".format(self.output_padding))

    @classmethod
    def of(cls, ndim=2, stride=1, padding=0, dilation=1, output_padding=0):
        return cls(_expand(stride, ndim, 'stride'), _expand(padding, ndim, 'padding'),
                   _expand(dilation, ndim, 'dilation'), _expand(output_padding, ndim, 'output_padding'))

    @property
    def ndim(self):
        return len(self.stride)

    def lift(self):
        """2D spec -> 3D spec with a trivial temporal axis"""
        if self.ndim == 3:
            return self
        return ConvSpec((1,) + self.stride, (0,) + self.padding, (1,) + self.dilation, (0,) + self.output_padding)


@dataclass
class GradPair:
    input_grad: np.ndarray
    param_grads: Dict[str, np.ndarray] = field(default_factory=dict)
