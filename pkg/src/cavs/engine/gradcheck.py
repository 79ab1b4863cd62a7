"""
Central-difference verification of backward passes, plus the suite of
small random cases the ``gradcheck`` command runs over every operator.

The scalar checked is L = sum(r * forward(inputs)) for a fixed random r, so the
analytic gradient of input ``name`` is ``backward(inputs, r)[name]``. Errors
are |analytic - numeric| divided by the largest magnitude seen among all
checked entries.
"""
import logging

import numpy as np

from . import functional as F
from .tensor import ConvSpec

logger = logging.getLogger(__name__)


def _pick_entries(inputs, names, max_entries, rng):
    if max_entries is None:
        return [(name, i) for name in names for i in range(inputs[name].size)]
    sizes = np.array([inputs[name].size for name in names])
    total = int(sizes.sum())
    flat = np.sort(rng.choice(total, size=min(max_entries, total), replace=False))
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    picks = []
    for k in flat:
        j = int(np.searchsorted(offsets, k, side='right') - 1)
        picks.append((names[j], int(k - offsets[j])))
    return picks


def gradcheck_errors(forward, backward, inputs, eps=1e-6, seed=0, names=None, max_entries=None):
    """
    Per-input relative errors between analytic and numeric gradients.

    The denominator is shared: every input's worst |analytic - numeric| is
    divided by the largest |analytic| or |numeric| over all checked entries of
    all inputs (floored at 1e-12). An input whose gradients are much smaller
    than the others' is therefore held to an absolute bound, not a relative
    one. Per-entry ratios are avoided because near-zero entries would turn
    central-difference roundoff into large errors; the tolerances of the
    ``gradcheck`` command are set for this measure.

    args:
        forward (callable): inputs dict -> output array
        backward (callable): (inputs dict, grad_out) -> dict of gradients by input name
        inputs (dict): name -> float64 array, perturbed in place and restored
        eps (float): central-difference step
        names (list or None): inputs to check, default all
        max_entries (int or None): check a random subset of this many entries in total
    returns:
        errors (dict): name -> max relative error over its checked entries
    """
    rng = np.random.default_rng(seed)
    names = list(inputs) if names is None else list(names)
    out = forward(inputs)
    r = rng.standard_normal(out.shape)
    analytic = backward(inputs, r)

    def objective():
        return float(np.sum(r * forward(inputs)))

    diffs = {name: 0.0 for name in names}
    scale = 0.0
    for name, i in _pick_entries(inputs, names, max_entries, rng):
        array = inputs[name]
        original = array.flat[i]
        array.flat[i] = original + eps
        up = objective()
        array.flat[i] = original - eps
        down = objective()
        array.flat[i] = original
        numeric = (up - down) / (2 * eps)
        a = float(np.asarray(analytic[name]).flat[i])
        diffs[name] = max(diffs[name], abs(a - numeric))
        scale = max(scale, abs(a), abs(numeric))
    scale = max(scale, 1e-12)
    return {name: d / scale for name, d in diffs.items()}


def gradcheck(forward, backward, inputs, eps=1e-6, seed=0, names=None, max_entries=None):
    """
    Max relative error over all checked inputs, see gradcheck_errors
    """
    errors = gradcheck_errors(forward, backward, inputs, eps=eps, seed=seed, names=names, max_entries=max_entries)
    return max(errors.values()) if errors else 0.0


### OPERATOR SUITE ###

def _conv2d_case(rng):
    spec = ConvSpec.of(2, stride=(1, 2), padding=1, dilation=(2, 1))
    inputs = {'x': rng.standard_normal((2, 2, 6, 7)), 'weight': rng.standard_normal((3, 2, 3, 3)),
              'bias': rng.standard_normal(3)}

    def fwd(v):
        return F.conv2d_forward(v['x'], v['weight'], v['bias'], spec)

    def bwd(v, g):
        grads = F.conv2d_backward(v['x'], v['weight'], spec, g)
        return dict(grads.param_grads, x=grads.input_grad)
    return fwd, bwd, inputs


def _conv3d_case(rng):
    spec = ConvSpec.of(3, stride=1, padding=(0, 1, 1))
    inputs = {'x': rng.standard_normal((1, 1, 3, 5, 5)), 'weight': rng.standard_normal((2, 1, 3, 3, 3)),
              'bias': rng.standard_normal(2)}

    def fwd(v):
        return F.conv3d_forward(v['x'], v['weight'], v['bias'], spec)

    def bwd(v, g):
        grads = F.conv3d_backward(v['x'], v['weight'], spec, g)
        return dict(grads.param_grads, x=grads.input_grad)
    return fwd, bwd, inputs


def _conv_transpose2d_case(rng):
    spec = ConvSpec.of(2, stride=2, padding=1, output_padding=1)
    inputs = {'x': rng.standard_normal((2, 3, 4, 4)), 'weight': rng.standard_normal((3, 2, 3, 3)),
              'bias': rng.standard_normal(2)}

    def fwd(v):
        return F.conv_transpose2d_forward(v['x'], v['weight'], v['bias'], spec)

    def bwd(v, g):
        grads = F.conv_transpose2d_backward(v['x'], v['weight'], spec, g)
        return dict(grads.param_grads, x=grads.input_grad)
    return fwd, bwd, inputs


def _maxpool2d_case(rng):
    # a permutation keeps every window free of ties
    inputs = {'x': rng.permutation(2 * 2 * 8 * 8).reshape(2, 2, 8, 8) / 16.0}

    def fwd(v):
        return F.maxpool2d_forward(v['x'], 3, 2, 1)[0]

    def bwd(v, g):
        _, arg = F.maxpool2d_forward(v['x'], 3, 2, 1)
        return {'x': F.maxpool2d_backward(v['x'].shape, arg, g)}
    return fwd, bwd, inputs


def _upsample_case(rng):
    inputs = {'x': rng.standard_normal((1, 2, 3, 4))}

    def fwd(v):
        return F.upsample_bilinear_forward(v['x'], 7, 8)

    def bwd(v, g):
        return {'x': F.upsample_bilinear_backward(v['x'].shape, g)}
    return fwd, bwd, inputs


def _instance_norm_case(rng):
    inputs = {'x': rng.standard_normal((2, 3, 5, 4)), 'gamma': rng.standard_normal(3),
              'beta': rng.standard_normal(3)}

    def fwd(v):
        return F.instance_norm_forward(v['x'], v['gamma'], v['beta'])[0]

    def bwd(v, g):
        _, cache = F.instance_norm_forward(v['x'], v['gamma'], v['beta'])
        grads = F.instance_norm_backward(cache, v['gamma'], g)
        return dict(grads.param_grads, x=grads.input_grad)
    return fwd, bwd, inputs


def _relu_case(rng):
    # keep values away from the kink
    x = rng.standard_normal((2, 3, 4, 4))
    inputs = {'x': x + np.sign(x) * 0.1}

    def fwd(v):
        return F.relu_forward(v['x'])

    def bwd(v, g):
        return {'x': F.relu_backward(v['x'], g)}
    return fwd, bwd, inputs


def _sigmoid_case(rng):
    inputs = {'x': 3 * rng.standard_normal((2, 1, 4, 4))}

    def fwd(v):
        return F.sigmoid_forward(v['x'])

    def bwd(v, g):
        return {'x': F.sigmoid_backward(F.sigmoid_forward(v['x']), g)}
    return fwd, bwd, inputs


def _add_case(rng):
    inputs = {'a': rng.standard_normal((2, 3, 4, 4)), 'b': rng.standard_normal((2, 3, 4, 4))}

    def fwd(v):
        return F.add_forward(v['a'], v['b'])

    def bwd(v, g):
        ga, gb = F.add_backward(g)
        return {'a': ga, 'b': gb}
    return fwd, bwd, inputs


def _concat_case(rng):
    inputs = {'a': rng.standard_normal((1, 3, 4, 4)), 'b': rng.standard_normal((1, 4, 4, 4))}

    def fwd(v):
        return F.concat_channels_forward([v['a'], v['b']])

    def bwd(v, g):
        ga, gb = F.concat_channels_backward([3, 4], g)
        return {'a': ga, 'b': gb}
    return fwd, bwd, inputs


OP_CASES = {
    'conv2d': _conv2d_case,
    'conv3d': _conv3d_case,
    'conv_transpose2d': _conv_transpose2d_case,
    'maxpool2d': _maxpool2d_case,
    'upsample_bilinear': _upsample_case,
    'instance_norm': _instance_norm_case,
    'relu': _relu_case,
    'sigmoid': _sigmoid_case,
    'add': _add_case,
    'concat_channels': _concat_case,
}


def run_op_suite(seed=0, eps=1e-6):
    """
    Runs every operator case in float64. Returns name -> max relative error.
    """
    results = {}
    for name, make in OP_CASES.items():
        fwd, bwd, inputs = make(np.random.default_rng(seed))
        results[name] = gradcheck(fwd, bwd, inputs, eps=eps, seed=seed)
        logger.debug("gradcheck %s: %.3e", name, results[name])
    return results
