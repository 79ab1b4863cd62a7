"""
Assembly of the 3D-2D network and the functional forward/backward over a
named parameter store. Nothing here holds state between calls: the layer
tree is a pure description derived from the config, parameters live in
NetworkParams and activations in a ForwardTrace owned by the caller.
"""
import functools
import logging
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np

from ..engine.gradcheck import gradcheck_errors
from ..engine.layers import Block
from ..engine.tensor import GradPair, default_dtype
from ..errors import ShapeError
from .blocks import DACBlock, Decoder, Encoder, FusionBlock, Head, RMPBlock, RMP_POOLS
from .config import ModelConfig

logger = logging.getLogger(__name__)


class CENet3D2D(Block):
    """
    Layer tree of the whole network for one ModelConfig.
    """
    def __init__(self, config):
        super().__init__('')
        self.config = config
        self.fusion = FusionBlock(config)
        self.encoder = Encoder(config)
        self.dac = DACBlock(config.stage_channels[3])
        self.rmp = RMPBlock(config.stage_channels[3])
        self.decoder = Decoder(config)
        self.head = Head(config)
        self.children = [self.fusion, self.encoder, self.dac, self.rmp, self.decoder, self.head]


@functools.lru_cache(maxsize=16)
def architecture(config):
    return CENet3D2D(config)


class NetworkParams(dict):
    """
    Parameter path -> tensor, plus the config the set was built for.
    """
    def __init__(self, config, tensors=()):
        super().__init__(tensors)
        self.config = config

    def copy(self):
        return NetworkParams(self.config, {name: t.copy() for name, t in self.items()})

    @property
    def dtype(self):
        return next(iter(self.values())).dtype

    def count(self):
        return int(sum(t.size for t in self.values()))

    def astype(self, dtype):
        return NetworkParams(self.config, {name: t.astype(dtype) for name, t in self.items()})


@dataclass
class ForwardTrace:
    config: ModelConfig
    input_shape: tuple
    caches: Dict[str, object] = field(default_factory=dict)
    skips: List[np.ndarray] = field(default_factory=list)


def build_network(config, dtype=None):
    """
    Allocates and initializes every parameter: He fan-in normal conv weights,
    zero biases, unit gamma and zero beta. Values depend only on (seed, name).
    """
    params = NetworkParams(config, architecture(config).init_params(config.seed, dtype or default_dtype()))
    logger.debug("built network N=%d %s with %d parameters", config.N, config.in_resolution, params.count())
    return params


def parameter_shapes(config):
    return architecture(config).param_shapes()


def parameter_count(config):
    return int(sum(np.prod(shape) for shape in parameter_shapes(config).values()))


def decayed_names(config):
    """conv weights; biases and norm affine parameters are not decayed"""
    return architecture(config).decayed_names()


def check_closed(params):
    """rejects a parameter set that does not match its architecture exactly"""
    expected = parameter_shapes(params.config)
    missing = [n for n in expected if n not in params]
    extra = [n for n in params if n not in expected]
    if missing or extra:
        raise ShapeError("parameter set does not match the architecture: missing {}, unexpected {}".format(
            missing[:3], extra[:3]))
    for name, shape in expected.items():
        if params[name].shape != tuple(shape):
            raise ShapeError("parameter {} has shape {}, expected {}".format(name, params[name].shape, shape))


def _record(trace, key, cache):
    if trace is not None:
        trace.caches[key] = cache


def fusion_forward(frames, params, trace=None):
    """(B, 1, 2N+1, H, W) frames -> (B, fused_channels, H, W)"""
    y, cache = architecture(params.config).fusion.forward(frames, params)
    _record(trace, 'fusion', cache)
    return y


def encoder_forward(x, params, trace=None):
    """returns (bottleneck, skips) with the four stage outputs as skips"""
    (bottleneck, skips), cache = architecture(params.config).encoder.forward(x, params)
    _record(trace, 'encoder', cache)
    if trace is not None:
        trace.skips = list(skips)
    return bottleneck, skips


def dac_forward(x, params, trace=None):
    y, cache = architecture(params.config).dac.forward(x, params)
    _record(trace, 'dac', cache)
    return y


def rmp_forward(x, params, trace=None, adaptive=False):
    y, cache = architecture(params.config).rmp.forward(x, params, adaptive=adaptive)
    _record(trace, 'rmp', cache)
    return y


def decoder_forward(bottleneck, skips, params, trace=None):
    y, cache = architecture(params.config).decoder.forward(bottleneck, skips, params)
    _record(trace, 'decoder', cache)
    return y


def forward(frames, params):
    """
    Probability mask for the central frame of every window.

    args:
        frames (ndarray): (B, 1, 2N+1, H, W) preprocessed frames
        params (NetworkParams): from build_network or load_checkpoint
    returns:
        prob (ndarray): (B, 1, H, W) values in [0, 1]
        trace (ForwardTrace): activations needed by backward
    """
    check_closed(params)
    config = params.config
    frames = np.asarray(frames, dtype=params.dtype)
    if frames.ndim == 5 and frames.shape[3:] != config.in_resolution:
        raise ShapeError("frames are {}x{}, network expects {}x{}".format(*frames.shape[3:], *config.in_resolution))
    trace = ForwardTrace(config, frames.shape)
    fused = fusion_forward(frames, params, trace)
    bottleneck, skips = encoder_forward(fused, params, trace)
    context = dac_forward(bottleneck, params, trace)
    adaptive = min(context.shape[2:]) < max(RMP_POOLS)
    pooled = rmp_forward(context, params, trace, adaptive=adaptive)
    decoded = decoder_forward(pooled, skips, params, trace)
    prob, cache = architecture(config).head.forward(decoded, params)
    _record(trace, 'head', cache)
    return prob, trace


def backward(trace, params, grad_mask):
    """
    Gradients of sum(grad_mask * prob) for every parameter (keys in parameter
    order) and for the input frames.
    """
    if not trace.config.compatible(params.config):
        raise ShapeError("trace was recorded for a different network configuration")
    missing = [k for k in ('fusion', 'encoder', 'dac', 'rmp', 'decoder', 'head') if k not in trace.caches]
    if missing:
        raise ShapeError("trace is incomplete, missing {}".format(", ".join(missing)))
    net = architecture(params.config)
    grads = {}
    pair = net.head.backward(trace.caches['head'], params, grad_mask)
    grads.update(pair.param_grads)
    pair, skip_grads = net.decoder.backward(trace.caches['decoder'], params, pair.input_grad)
    grads.update(pair.param_grads)
    for part in (net.rmp, net.dac):
        pair = part.backward(trace.caches[part.name], params, pair.input_grad)
        grads.update(pair.param_grads)
    pair = net.encoder.backward(trace.caches['encoder'], params, pair.input_grad, skip_grads)
    grads.update(pair.param_grads)
    pair = net.fusion.backward(trace.caches['fusion'], params, pair.input_grad)
    grads.update(pair.param_grads)
    return GradPair(pair.input_grad, {name: grads[name] for name in params})


def network_gradcheck(config, batch=1, entries=200, seed=0, eps=1e-6, jitter=0.1):
    """
    Finite-difference check of the whole network on random frames in float64.
    Norm affine parameters and biases are jittered away from their initial
    values so no ReLU sits exactly on its kink.

    returns:
        error (float): max relative error over ``entries`` random parameter entries
    """
    rng = np.random.default_rng(seed)
    params = build_network(config, dtype=np.float64)
    for name, t in params.items():
        if not name.endswith('.weight'):
            t += jitter * rng.standard_normal(t.shape)
    frames = rng.random((batch, 1, config.frames) + config.in_resolution)

    def fwd(values):
        return forward(frames, params)[0]

    def bwd(values, grad_out):
        _, trace = forward(frames, params)
        return backward(trace, params, grad_out).param_grads

    errors = gradcheck_errors(fwd, bwd, params, eps=eps, seed=seed, max_entries=entries)
    return max(errors.values())
