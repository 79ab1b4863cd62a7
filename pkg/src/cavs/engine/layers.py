"""
Sets up the Layer class that every differentiable op of the network inherits
from, followed by the concrete layers (conv, norm, activation, pooling) and
the Sequential container.

A layer is a stateless description: it knows its parameter names and shapes,
and maps (input, params) to (output, cache) and (cache, params, grad) to a
GradPair. Parameters live in a flat mapping keyed by '<layer name>.<leaf>'.
"""
import zlib

import numpy as np

from . import functional as F
from .tensor import ConvSpec, GradPair, default_dtype


def param_rng(seed, name):
    """Generator seeded by (seed, name) so a parameter's values do not depend on its neighbours"""
    return np.random.default_rng([int(seed), zlib.crc32(name.encode('utf-8'))])


class Layer:
    """
    Generic layer, sub-classes override the methods they need.
    """
    def __init__(self, name):
        self.name = name

    def key(self, leaf):
        return "{}.{}".format(self.name, leaf) if self.name else leaf

    def param_shapes(self):
        """dict of full parameter name -> shape"""
        return {}

    def init_params(self, seed, dtype=None):
        return {}

    def decayed_names(self):
        """names of the parameters that receive weight decay"""
        return set()

    def forward(self, x, params):
        raise NotImplementedError("forward() must be defined in the child class")

    def backward(self, cache, params, grad_out):
        raise NotImplementedError("backward() must be defined in the child class")

    def __repr__(self):
        return "{}({!r})".format(type(self).__name__, self.name)


class _ConvBase(Layer):
    ndim = 2

    def __init__(self, name, in_channels, out_channels, kernel, stride=1, padding=0, dilation=1, bias=True):
        super().__init__(name)
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = (kernel,) * self.ndim if np.isscalar(kernel) else tuple(kernel)
        self.spec = ConvSpec.of(self.ndim, stride=stride, padding=padding, dilation=dilation)
        self.bias = bias

    def weight_shape(self):
        return (self.out_channels, self.in_channels) + self.kernel

    def fan_in(self):
        return self.in_channels * int(np.prod(self.kernel))

    def param_shapes(self):
        shapes = {self.key('weight'): self.weight_shape()}
        if self.bias:
            shapes[self.key('bias')] = (self.out_channels,)
        return shapes

    def init_params(self, seed, dtype=None):
        """He fan-in normal weights, zero bias"""
        dtype = dtype or default_dtype()
        std = np.sqrt(2.0 / self.fan_in())
        rng = param_rng(seed, self.key('weight'))
        params = {self.key('weight'): (rng.standard_normal(self.weight_shape()) * std).astype(dtype)}
        if self.bias:
            params[self.key('bias')] = np.zeros(self.out_channels, dtype=dtype)
        return params

    def decayed_names(self):
        return {self.key('weight')}

    def _bias(self, params):
        return params[self.key('bias')] if self.bias else None

    def _grads(self, grads):
        out = {self.key('weight'): grads.param_grads['weight']}
        if self.bias:
            out[self.key('bias')] = grads.param_grads['bias']
        return GradPair(grads.input_grad, out)


class Conv2d(_ConvBase):
    ndim = 2

    def forward(self, x, params):
        return F.conv2d_forward(x, params[self.key('weight')], self._bias(params), self.spec), x

    def backward(self, cache, params, grad_out):
        return self._grads(F.conv2d_backward(cache, params[self.key('weight')], self.spec, grad_out))


class Conv3d(_ConvBase):
    ndim = 3

    def forward(self, x, params):
        return F.conv3d_forward(x, params[self.key('weight')], self._bias(params), self.spec), x

    def backward(self, cache, params, grad_out):
        return self._grads(F.conv3d_backward(cache, params[self.key('weight')], self.spec, grad_out))


class ConvTranspose2d(_ConvBase):
    ndim = 2

    def __init__(self, name, in_channels, out_channels, kernel, stride=1, padding=0, output_padding=0, bias=True):
        super().__init__(name, in_channels, out_channels, kernel, stride=stride, padding=padding, bias=bias)
        self.spec = ConvSpec.of(2, stride=stride, padding=padding, output_padding=output_padding)

    def weight_shape(self):
        return (self.in_channels, self.out_channels) + self.kernel

    def forward(self, x, params):
        return F.conv_transpose2d_forward(x, params[self.key('weight')], self._bias(params), self.spec), x

    def backward(self, cache, params, grad_out):
        return self._grads(F.conv_transpose2d_backward(cache, params[self.key('weight')], self.spec, grad_out))


class InstanceNorm(Layer):
    def __init__(self, name, channels, eps=1e-5):
        super().__init__(name)
        self.channels = channels
        self.eps = eps

    def param_shapes(self):
        return {self.key('gamma'): (self.channels,), self.key('beta'): (self.channels,)}

    def init_params(self, seed, dtype=None):
        dtype = dtype or default_dtype()
        return {self.key('gamma'): np.ones(self.channels, dtype=dtype),
                self.key('beta'): np.zeros(self.channels, dtype=dtype)}

    def forward(self, x, params):
        return F.instance_norm_forward(x, params[self.key('gamma')], params[self.key('beta')], self.eps)

    def backward(self, cache, params, grad_out):
        grads = F.instance_norm_backward(cache, params[self.key('gamma')], grad_out)
        return GradPair(grads.input_grad, {self.key('gamma'): grads.param_grads['gamma'],
                                           self.key('beta'): grads.param_grads['beta']})


class ReLU(Layer):
    def __init__(self, name=''):
        super().__init__(name)

    def forward(self, x, params):
        return F.relu_forward(x), x

    def backward(self, cache, params, grad_out):
        return GradPair(F.relu_backward(cache, grad_out))


class Sigmoid(Layer):
    def __init__(self, name=''):
        super().__init__(name)

    def forward(self, x, params):
        y = F.sigmoid_forward(x)
        return y, y

    def backward(self, cache, params, grad_out):
        return GradPair(F.sigmoid_backward(cache, grad_out))


class MaxPool2d(Layer):
    def __init__(self, name, kernel, stride=None, padding=0):
        super().__init__(name)
        self.kernel = kernel
        self.stride = stride
        self.padding = padding

    def forward(self, x, params):
        y, arg = F.maxpool2d_forward(x, self.kernel, self.stride, self.padding)
        return y, (x.shape, arg)

    def backward(self, cache, params, grad_out):
        shape, arg = cache
        return GradPair(F.maxpool2d_backward(shape, arg, grad_out))


class Block(Layer):
    """
    Layer built from child layers with its own wiring. Sub-classes fill
    ``self.children`` and implement forward/backward; parameter bookkeeping
    is the union over the children.
    """
    def __init__(self, name):
        super().__init__(name)
        self.children = []

    def param_shapes(self):
        shapes = {}
        for child in self.children:
            shapes.update(child.param_shapes())
        return shapes

    def init_params(self, seed, dtype=None):
        params = {}
        for child in self.children:
            params.update(child.init_params(seed, dtype))
        return params

    def decayed_names(self):
        names = set()
        for child in self.children:
            names |= child.decayed_names()
        return names


class Sequential(Block):
    """
    Chains child layers, backward runs them in reverse and merges parameter grads.
    """
    def __init__(self, name, layers):
        super().__init__(name)
        self.children = list(layers)

    def forward(self, x, params):
        caches = []
        for layer in self.children:
            x, cache = layer.forward(x, params)
            caches.append(cache)
        return x, caches

    def backward(self, cache, params, grad_out):
        grads = {}
        for layer, c in zip(reversed(self.children), reversed(cache)):
            pair = layer.backward(c, params, grad_out)
            grad_out = pair.input_grad
            grads.update(pair.param_grads)
        return GradPair(grad_out, grads)


def conv_norm_relu(name, in_channels, out_channels, kernel, stride=1, padding=0, dilation=1, relu=True):
    """conv (no bias) -> instance norm -> optional ReLU, named <name>.conv / <name>.norm"""
    layers = [Conv2d(name + '.conv', in_channels, out_channels, kernel, stride, padding, dilation, bias=False),
              InstanceNorm(name + '.norm', out_channels)]
    if relu:
        layers.append(ReLU())
    return Sequential(name, layers)
