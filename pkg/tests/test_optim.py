import numpy as np
import pytest

from cavs.engine.optim import adam_step, decay_penalty, sgd_step
from cavs.errors import ShapeError


def test_sgd_step_example():
    params = {'w': np.array([1.0, 2.0]), 'b': np.array([0.5])}
    grads = {'w': np.array([0.5, -1.0]), 'b': np.array([1.0])}
    sgd_step(params, grads, lr=0.1, weight_decay=0.01, decayed={'w'})
    np.testing.assert_allclose(params['w'], [1.0 - 0.1 * (0.5 + 0.01), 2.0 - 0.1 * (-1.0 + 0.02)])
    np.testing.assert_allclose(params['b'], [0.4])


def test_zero_lr_leaves_params():
    params = {'w': np.array([1.0, 2.0])}
    sgd_step(params, {'w': np.array([3.0, 3.0])}, lr=0.0, weight_decay=0.5)
    np.testing.assert_array_equal(params['w'], [1.0, 2.0])


def test_sgd_rejects_missing_and_misshapen_grads():
    params = {'w': np.zeros(2), 'b': np.zeros(1)}
    with pytest.raises(ValueError, match='b'):
        sgd_step(params, {'w': np.zeros(2)}, 0.1)
    with pytest.raises(ShapeError):
        sgd_step(params, {'w': np.zeros(3), 'b': np.zeros(1)}, 0.1)


def test_sgd_keeps_dtype():
    params = {'w': np.ones(3, dtype=np.float32)}
    sgd_step(params, {'w': np.ones(3, dtype=np.float64)}, 0.25)
    assert params['w'].dtype == np.float32
    np.testing.assert_array_equal(params['w'], np.full(3, 0.75, dtype=np.float32))


def test_decay_penalty():
    params = {'w': np.array([1.0, 2.0]), 'b': np.array([3.0])}
    assert decay_penalty(params, 0.1, {'w'}) == pytest.approx(0.25)
    assert decay_penalty(params, 0.1) == pytest.approx(0.7)
    assert decay_penalty(params, 0.0) == 0.0


def test_adam_first_step_moves_by_lr():
    params = {'w': np.array([1.0, -2.0, 0.5]), 'b': np.array([0.0])}
    grads = {'w': np.array([1e-4, -3.0, 0.2]), 'b': np.array([-1e-6])}
    state = {}
    adam_step(params, grads, state, lr=0.01)
    np.testing.assert_allclose(params['w'], [0.99, -1.99, 0.49], atol=1e-5)
    np.testing.assert_allclose(params['b'], [0.01], atol=2e-4)
    assert state['w']['t'] == 1


def test_adam_decays_only_named_params():
    params = {'w': np.array([1.0]), 'b': np.array([1.0])}
    grads = {'w': np.array([0.0]), 'b': np.array([0.0])}
    adam_step(params, grads, {}, lr=0.1, weight_decay=0.5, decayed={'w'})
    np.testing.assert_allclose(params['w'], [0.9], atol=1e-6)
    assert params['b'][0] == 1.0


def test_adam_rejects_missing_grads():
    with pytest.raises(ValueError):
        adam_step({'w': np.zeros(2)}, {}, {}, 0.1)
