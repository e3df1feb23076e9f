"""Seeded weight initialisers.

Every random draw goes through a ``numpy.random.Generator`` (PCG64) so that a
seed fully determines the initial parameters.
"""

import numpy as np

from emostyle.autograd.tensor import Tensor


def fans(shape):
    if len(shape) == 2:  # dense [in, out]
        return shape[0], shape[1]
    receptive = int(np.prod(shape[2:]))
    return shape[1] * receptive, shape[0] * receptive


def he_uniform(shape, rng, fan_in=None, dtype=np.float32):
    fan_in = fan_in or fans(shape)[0]
    limit = np.sqrt(6.0 / fan_in)
    return Tensor(rng.uniform(-limit, limit, size=shape).astype(dtype), requires_grad=True)


def glorot_uniform(shape, rng, dtype=np.float32):
    fan_in, fan_out = fans(shape)
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-limit, limit, size=shape).astype(dtype), requires_grad=True)


def zeros(shape, dtype=np.float32):
    return Tensor(np.zeros(shape, dtype=dtype), requires_grad=True)


def ones(shape, dtype=np.float32):
    return Tensor(np.ones(shape, dtype=dtype), requires_grad=True)
