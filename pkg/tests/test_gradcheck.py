import numpy as np
import pytest

from cavs.engine.gradcheck import OP_CASES, gradcheck, gradcheck_errors, run_op_suite
from cavs.engine.layers import Conv2d, conv_norm_relu
from cavs.model.blocks import BasicBlock, DACBlock, DecoderBlock, RMPBlock

OP_TOLERANCE = 1e-5
BLOCK_TOLERANCE = 1e-5


@pytest.mark.parametrize('seed', [0, 1, 2])
def test_every_op_passes(seed):
    errors = run_op_suite(seed=seed)
    assert set(errors) == set(OP_CASES)
    for name, error in errors.items():
        assert error < OP_TOLERANCE, name


def test_gradcheck_detects_wrong_backward(rng):
    inputs = {'x': rng.standard_normal((3, 4))}

    def fwd(v):
        return v['x'] ** 2

    def bad_bwd(v, g):
        return {'x': g * v['x']}

    def good_bwd(v, g):
        return {'x': 2 * g * v['x']}

    assert gradcheck(fwd, good_bwd, inputs) < 1e-8
    assert gradcheck(fwd, bad_bwd, inputs) > 0.1


def test_gradcheck_restores_inputs(rng):
    x = rng.standard_normal((2, 3))
    inputs = {'x': x.copy()}
    gradcheck(lambda v: np.sin(v['x']), lambda v, g: {'x': g * np.cos(v['x'])}, inputs)
    np.testing.assert_array_equal(inputs['x'], x)


def test_errors_share_one_scale(rng):
    inputs = {'a': rng.standard_normal((3, 4)), 'b': rng.standard_normal((3, 4))}

    def fwd(v):
        return 100 * v['a'] + v['b']

    def bwd(v, g):
        return {'a': 100 * g, 'b': 1.001 * g}

    errors = gradcheck_errors(fwd, bwd, inputs)
    # the 0.1% slip on b is measured against the gradients of a
    assert errors['b'] == pytest.approx(1e-5, rel=1e-2)
    assert errors['a'] < 1e-6


def _layer_errors(layer, x, seed=0, jitter=0.1, forward_kwargs=None, max_entries=150):
    rng = np.random.default_rng(seed)
    params = layer.init_params(seed, np.float64)
    for name, t in params.items():
        if not name.endswith('.weight'):
            t += jitter * rng.standard_normal(t.shape)
    inputs = dict(params, x=x)
    kwargs = forward_kwargs or {}

    def fwd(v):
        return layer.forward(v['x'], v, **kwargs)[0]

    def bwd(v, g):
        y, cache = layer.forward(v['x'], v, **kwargs)
        pair = layer.backward(cache, v, g)
        return dict(pair.param_grads, x=pair.input_grad)

    return gradcheck_errors(fwd, bwd, inputs, seed=seed, max_entries=max_entries)


def test_conv_norm_relu_unit(rng):
    errors = _layer_errors(conv_norm_relu('u', 3, 4, 3, 2, 1), rng.standard_normal((2, 3, 7, 7)))
    assert max(errors.values()) < BLOCK_TOLERANCE


def test_dilated_conv(rng):
    layer = Conv2d('c', 2, 3, 3, 1, 3, 3, bias=True)
    errors = _layer_errors(layer, rng.standard_normal((1, 2, 8, 8)), max_entries=None)
    assert max(errors.values()) < BLOCK_TOLERANCE


def test_residual_block_with_projection(rng):
    errors = _layer_errors(BasicBlock('b', 2, 4, stride=2), rng.standard_normal((1, 2, 8, 8)))
    assert max(errors.values()) < BLOCK_TOLERANCE


def test_dac_block(rng):
    errors = _layer_errors(DACBlock(3), rng.standard_normal((1, 3, 8, 8)))
    assert max(errors.values()) < BLOCK_TOLERANCE


@pytest.mark.parametrize('size, adaptive', [(6, False), (4, True)])
def test_rmp_block(rng, size, adaptive):
    errors = _layer_errors(RMPBlock(3), rng.standard_normal((1, 3, size, size)),
                           forward_kwargs={'adaptive': adaptive}, max_entries=None)
    assert max(errors.values()) < BLOCK_TOLERANCE


def test_decoder_block(rng):
    errors = _layer_errors(DecoderBlock('d', 8, 4), rng.standard_normal((1, 8, 3, 3)))
    assert max(errors.values()) < BLOCK_TOLERANCE
