"""
Plain stochastic gradient descent. The regularisation term of the objective
is realised here as L2 weight decay on the parameters named in ``decayed``.
Adam is offered for runs where the small dice gradients stall plain SGD.
"""
import numpy as np

from ..errors import ShapeError


def sgd_step(params, grads, lr, weight_decay=0.0, decayed=None):
    """
    Updates ``params`` in place with p <- p - lr * (g + weight_decay * p) and returns it.

    args:
        params (Mapping[str, ndarray]): parameters, modified in place
        grads (Mapping[str, ndarray]): one gradient per parameter, same shapes
        lr (float): learning rate
        weight_decay (float): L2 coefficient
        decayed (set or None): names that receive weight decay, None means all
    """
    missing = [name for name in params if name not in grads]
    if missing:
        raise ValueError("missing gradients for {}".format(", ".join(missing[:5])))
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeError("gradient for {} has shape {}, parameter has {}".format(name, g.shape, p.shape))
        if lr == 0:
            continue
        if weight_decay and (decayed is None or name in decayed):
            step = g + weight_decay * p
        else:
            step = g
        p -= np.asarray(lr * step, dtype=p.dtype)
    return params


def decay_penalty(params, weight_decay, decayed=None):
    """(weight_decay / 2) * sum of squared decayed parameters"""
    if not weight_decay:
        return 0.0
    total = 0.0
    for name, p in params.items():
        if decayed is None or name in decayed:
            total += float(np.sum(np.square(p, dtype=np.float64)))
    return 0.5 * weight_decay * total


def adam_step(params, grads, state, lr, weight_decay=0.0, decayed=None, betas=(0.9, 0.999), eps=1e-8):
    """
    Adam update with the L2 term folded into the gradient like sgd_step.
    ``state`` maps parameter name -> {'t', 'm', 'v'} and is filled on first use.
    """
    beta1, beta2 = betas
    missing = [name for name in params if name not in grads]
    if missing:
        raise ValueError("missing gradients for {}".format(", ".join(missing[:5])))
    for name, p in params.items():
        g = np.asarray(grads[name], dtype=np.float64)
        if g.shape != p.shape:
            raise ShapeError("gradient for {} has shape {}, parameter has {}".format(name, g.shape, p.shape))
        if weight_decay and (decayed is None or name in decayed):
            g = g + weight_decay * p
        st = state.setdefault(name, {'t': 0, 'm': np.zeros(p.shape), 'v': np.zeros(p.shape)})
        st['t'] += 1
        st['m'] = beta1 * st['m'] + (1 - beta1) * g
        st['v'] = beta2 * st['v'] + (1 - beta2) * g * g
        m_hat = st['m'] / (1 - beta1 ** st['t'])
        v_hat = st['v'] / (1 - beta2 ** st['t'])
        p -= np.asarray(lr * m_hat / (np.sqrt(v_hat) + eps), dtype=p.dtype)
    return params
