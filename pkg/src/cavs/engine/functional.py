"""
Forward and backward maps of every differentiable operator the network uses.
All functions are pure: they read their arguments and return fresh arrays,
and each backward takes whatever its forward returned as cache.

Conventions: NCHW / NCDHW layouts, cross-correlation (no kernel flip),
transposed-conv weights laid out (Cin, Cout, kh, kw).
"""
import numpy as np

from . import _kernels
from .tensor import ConvSpec, GradPair
from ..errors import ShapeError

__all__ = [
    "conv_output_size", "conv_transpose_output_size",
    "conv2d_forward", "conv2d_backward", "conv3d_forward", "conv3d_backward",
    "conv_transpose2d_forward", "conv_transpose2d_backward",
    "maxpool2d_forward", "maxpool2d_backward", "interpolation_matrix",
    "upsample_bilinear_forward", "upsample_bilinear_backward",
    "instance_norm_forward", "instance_norm_backward",
    "relu_forward", "relu_backward", "sigmoid_forward", "sigmoid_backward",
    "add_forward", "add_backward", "concat_channels_forward", "concat_channels_backward",
]


def _check_ndim(t, ndim, what):
    if t.ndim != ndim:
        raise ShapeError("{} must be {}D, got shape {}".format(what, ndim, t.shape))


def conv_output_size(size, kernel, stride, padding, dilation):
    return (size + 2 * padding - dilation * (kernel - 1) - 1) // stride + 1


def conv_transpose_output_size(size, kernel, stride, padding, dilation=1, output_padding=0):
    return (size - 1) * stride - 2 * padding + dilation * (kernel - 1) + 1 + output_padding


def _geometry(spec):
    s, p, d = spec.stride, spec.padding, spec.dilation
    return (s[0], s[1], s[2], p[0], p[1], p[2], d[0], d[1], d[2])


def _conv_shapes(x, w, spec, axis_names):
    if x.shape[1] != w.shape[1]:
        raise ShapeError("input channels {} do not match weight Cin {} (dim 1)".format(x.shape[1], w.shape[1]))
    out = []
    for i, name in enumerate(axis_names):
        n = conv_output_size(x.shape[2 + i], w.shape[2 + i], spec.stride[i], spec.padding[i], spec.dilation[i])
        if n < 1:
            raise ShapeError("non-positive output size {} along {} (input {}, kernel {})".format(
                n, name, x.shape[2 + i], w.shape[2 + i]))
        out.append(n)
    return tuple(out)


def _bias_or_zeros(b, channels, dtype):
    if b is None:
        return np.zeros(channels, dtype=dtype)
    if b.shape != (channels,):
        raise ShapeError("bias shape {} does not match {} output channels".format(b.shape, channels))
    return b


### CONVOLUTION ###

def conv3d_forward(x, w, b, spec):
    """
    3D cross-correlation.

    args:
        x (ndarray): (B, Cin, D, H, W)
        w (ndarray): (Cout, Cin, kd, kh, kw)
        b (ndarray or None): (Cout,)
        spec (ConvSpec): 3-component geometry
    returns:
        out (ndarray): (B, Cout, D', H', W')
    """
    _check_ndim(x, 5, 'conv3d input')
    _check_ndim(w, 5, 'conv3d weight')
    spec = spec.lift()
    od, oh, ow = _conv_shapes(x, w, spec, ('D', 'H', 'W'))
    x = np.ascontiguousarray(x)
    out = np.empty((x.shape[0], w.shape[0], od, oh, ow), dtype=x.dtype)
    bias = _bias_or_zeros(b, w.shape[0], x.dtype)
    _kernels.conv3d_forward(x, np.ascontiguousarray(w, dtype=x.dtype), bias, out, *_geometry(spec))
    return out


def conv3d_backward(x, w, spec, grad_out):
    """
    Gradients of sum(grad_out * conv3d_forward(x, w, b, spec)) with respect to
    x, w and b. Parameter grads are keyed 'weight' and 'bias'.
    """
    _check_ndim(x, 5, 'conv3d input')
    spec = spec.lift()
    expected = (x.shape[0], w.shape[0]) + _conv_shapes(x, w, spec, ('D', 'H', 'W'))
    if grad_out.shape != expected:
        raise ShapeError("grad_out shape {} does not match forward output {}".format(grad_out.shape, expected))
    x = np.ascontiguousarray(x)
    g = np.ascontiguousarray(grad_out, dtype=x.dtype)
    w = np.ascontiguousarray(w, dtype=x.dtype)
    gw = np.empty_like(w)
    _kernels.conv3d_weight_grad(x, g, gw, *_geometry(spec))
    gx = np.zeros_like(x)
    _kernels.conv3d_input_grad(g, w, gx, *_geometry(spec))
    gb = g.sum(axis=(0, 2, 3, 4))
    return GradPair(gx, {'weight': gw, 'bias': gb})


def conv2d_forward(x, w, b, spec):
    """
    2D cross-correlation of (B, Cin, H, W) with (Cout, Cin, kh, kw) plus bias.
    """
    _check_ndim(x, 4, 'conv2d input')
    _check_ndim(w, 4, 'conv2d weight')
    return conv3d_forward(x[:, :, None], w[:, :, None], b, spec.lift())[:, :, 0]


def conv2d_backward(x, w, spec, grad_out):
    _check_ndim(x, 4, 'conv2d input')
    _check_ndim(w, 4, 'conv2d weight')
    _check_ndim(grad_out, 4, 'conv2d grad_out')
    grads = conv3d_backward(x[:, :, None], w[:, :, None], spec.lift(), grad_out[:, :, None])
    return GradPair(grads.input_grad[:, :, 0],
                    {'weight': grads.param_grads['weight'][:, :, 0], 'bias': grads.param_grads['bias']})


def _transpose_size(x, w, spec):
    size = tuple(conv_transpose_output_size(x.shape[2 + i], w.shape[2 + i], spec.stride[i], spec.padding[i],
                                            spec.dilation[i], spec.output_padding[i]) for i in range(2))
    if min(size) < 1:
        raise ShapeError("non-positive transposed-conv output size {}".format(size))
    return size


def conv_transpose2d_forward(x, w, b, spec):
    """
    Transposed 2D convolution, the adjoint of conv2d with the same weight and
    spec. Output size (H-1)*s - 2p + d*(k-1) + 1 + output_padding.

    args:
        x (ndarray): (B, Cin, H, W)
        w (ndarray): (Cin, Cout, kh, kw)
    """
    _check_ndim(x, 4, 'conv_transpose2d input')
    _check_ndim(w, 4, 'conv_transpose2d weight')
    if x.shape[1] != w.shape[0]:
        raise ShapeError("input channels {} do not match weight Cin {} (dim 0)".format(x.shape[1], w.shape[0]))
    oh, ow = _transpose_size(x, w, spec)
    out = np.zeros((x.shape[0], w.shape[1], 1, oh, ow), dtype=x.dtype)
    _kernels.conv3d_input_grad(np.ascontiguousarray(x[:, :, None]),
                               np.ascontiguousarray(w[:, :, None], dtype=x.dtype), out, *_geometry(spec.lift()))
    out = out[:, :, 0]
    if b is not None:
        out += _bias_or_zeros(b, w.shape[1], x.dtype)[None, :, None, None]
    return out


def conv_transpose2d_backward(x, w, spec, grad_out):
    _check_ndim(x, 4, 'conv_transpose2d input')
    expected = (x.shape[0], w.shape[1]) + _transpose_size(x, w, spec)
    if grad_out.shape != expected:
        raise ShapeError("grad_out shape {} does not match forward output {}".format(grad_out.shape, expected))
    geometry = _geometry(spec.lift())
    g = np.ascontiguousarray(grad_out[:, :, None], dtype=x.dtype)
    x5 = np.ascontiguousarray(x[:, :, None])
    w5 = np.ascontiguousarray(w[:, :, None], dtype=x.dtype)
    gx = np.empty_like(x5)
    _kernels.conv3d_forward(g, w5, np.zeros(w.shape[0], dtype=x.dtype), gx, *geometry)
    gw = np.empty_like(w5)
    # roles swap: x plays the conv output gradient, grad_out the conv input
    _kernels.conv3d_weight_grad(g, x5, gw, *geometry)
    gb = grad_out.sum(axis=(0, 2, 3)).astype(x.dtype)
    return GradPair(gx[:, :, 0], {'weight': gw[:, :, 0], 'bias': gb})


### POOLING AND RESAMPLING ###

def maxpool2d_forward(x, kernel, stride=None, padding=0):
    """
    Windowed max. Returns (out, argmax) where argmax holds the row-major index
    of the winner inside its (H, W) plane; ties go to the first index.
    """
    _check_ndim(x, 4, 'maxpool2d input')
    kh, kw = (kernel, kernel) if np.isscalar(kernel) else kernel
    stride = (kh, kw) if stride is None else stride
    sh, sw = (stride, stride) if np.isscalar(stride) else stride
    ph, pw = (padding, padding) if np.isscalar(padding) else padding
    H, W = x.shape[2:]
    if kh > H + 2 * ph or kw > W + 2 * pw:
        raise ShapeError("pool kernel {}x{} larger than padded input {}x{}".format(kh, kw, H + 2 * ph, W + 2 * pw))
    if ph >= kh or pw >= kw:
        raise ShapeError("pool padding must be smaller than the kernel")
    oh = (H + 2 * ph - kh) // sh + 1
    ow = (W + 2 * pw - kw) // sw + 1
    x = np.ascontiguousarray(x)
    out = np.empty(x.shape[:2] + (oh, ow), dtype=x.dtype)
    arg = np.empty(x.shape[:2] + (oh, ow), dtype=np.int64)
    _kernels.maxpool2d_forward(x, out, arg, kh, kw, sh, sw, ph, pw)
    return out, arg


def maxpool2d_backward(input_shape, argmax, grad_out):
    if grad_out.shape != argmax.shape:
        raise ShapeError("grad_out shape {} does not match pooled shape {}".format(grad_out.shape, argmax.shape))
    gx = np.zeros(input_shape, dtype=grad_out.dtype)
    _kernels.maxpool2d_backward(np.ascontiguousarray(grad_out), argmax, gx)
    return gx


def interpolation_matrix(n_in, n_out, dtype=np.float64):
    """
    (n_out, n_in) matrix of corner-aligned linear interpolation weights.
    """
    m = np.zeros((n_out, n_in), dtype=dtype)
    if n_in == 1 or n_out == 1:
        m[:, 0] = 1.0
        return m
    src = np.arange(n_out) * ((n_in - 1) / (n_out - 1))
    lo = np.minimum(np.floor(src).astype(np.int64), n_in - 2)
    frac = src - lo
    rows = np.arange(n_out)
    m[rows, lo] = 1.0 - frac
    m[rows, lo + 1] += frac
    return m


def upsample_bilinear_forward(x, out_h, out_w):
    _check_ndim(x, 4, 'upsample input')
    if out_h < 1 or out_w < 1:
        raise ShapeError("upsample output dims must be >= 1, got {}x{}".format(out_h, out_w))
    H, W = x.shape[2:]
    if (H, W) == (out_h, out_w):
        return x.copy()
    ah = interpolation_matrix(H, out_h, x.dtype)
    aw = interpolation_matrix(W, out_w, x.dtype)
    return ah @ x @ aw.T


def upsample_bilinear_backward(input_shape, grad_out):
    H, W = input_shape[2:]
    out_h, out_w = grad_out.shape[2:]
    if (H, W) == (out_h, out_w):
        return grad_out.copy()
    ah = interpolation_matrix(H, out_h, grad_out.dtype)
    aw = interpolation_matrix(W, out_w, grad_out.dtype)
    return ah.T @ grad_out @ aw


### NORMALIZATION ###

def instance_norm_forward(x, gamma, beta, eps=1e-5):
    """
    Per (sample, channel) plane standardization followed by the affine map.
    Returns (y, cache).
    """
    if x.ndim < 3:
        raise ShapeError("instance norm needs (B, C, spatial...) input, got {}".format(x.shape))
    C = x.shape[1]
    if gamma.shape != (C,) or beta.shape != (C,):
        raise ShapeError("gamma/beta shapes {}/{} do not match {} channels".format(gamma.shape, beta.shape, C))
    axes = tuple(range(2, x.ndim))
    bshape = (1, C) + (1,) * (x.ndim - 2)
    mean = x.mean(axis=axes, keepdims=True)
    centered = x - mean
    var = (centered * centered).mean(axis=axes, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std
    y = gamma.reshape(bshape) * xhat + beta.reshape(bshape)
    return y.astype(x.dtype, copy=False), (xhat, inv_std)


def instance_norm_backward(cache, gamma, grad_out):
    xhat, inv_std = cache
    axes = tuple(range(2, xhat.ndim))
    bshape = (1, -1) + (1,) * (xhat.ndim - 2)
    m = np.prod(xhat.shape[2:])
    dxhat = grad_out * gamma.reshape(bshape)
    sum_d = dxhat.sum(axis=axes, keepdims=True)
    sum_dx = (dxhat * xhat).sum(axis=axes, keepdims=True)
    gx = inv_std * (dxhat - sum_d / m - xhat * (sum_dx / m))
    red = (0,) + axes
    return GradPair(gx.astype(grad_out.dtype, copy=False),
                    {'gamma': (grad_out * xhat).sum(axis=red), 'beta': grad_out.sum(axis=red)})


### ELEMENTWISE ###

def relu_forward(x):
    return np.maximum(x, 0)


def relu_backward(x, grad_out):
    return grad_out * (x > 0)


def sigmoid_forward(x):
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid_backward(y, grad_out):
    """Takes the forward output, not its input."""
    return grad_out * y * (1.0 - y)


def add_forward(a, b):
    if a.shape != b.shape:
        raise ShapeError("cannot add shapes {} and {}".format(a.shape, b.shape))
    return a + b


def add_backward(grad_out):
    return grad_out, grad_out


def concat_channels_forward(tensors):
    first = tensors[0]
    for t in tensors[1:]:
        if t.ndim != first.ndim or t.shape[0] != first.shape[0] or t.shape[2:] != first.shape[2:]:
            raise ShapeError("cannot concatenate {} with {} along channels".format(first.shape, t.shape))
    return np.concatenate(tensors, axis=1)


def concat_channels_backward(channel_counts, grad_out):
    bounds = np.cumsum(channel_counts)[:-1]
    return np.split(grad_out, bounds, axis=1)
