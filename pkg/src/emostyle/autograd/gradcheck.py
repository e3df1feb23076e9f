"""Central finite-difference gradient checking."""

import numpy as np


def numerical_grad(fn, inputs, h=1e-4):
    """Central differences of scalar ``fn()`` w.r.t. each tensor in ``inputs``.

    ``fn`` must rebuild its forward pass on every call; inputs are perturbed
    in place and restored.
    """
    grads = []
    for t in inputs:
        g = np.zeros_like(t.data, dtype=np.float64)
        flat = t.data.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            plus = float(fn().data)
            flat[i] = orig - h
            minus = float(fn().data)
            flat[i] = orig
            g.reshape(-1)[i] = (plus - minus) / (2 * h)
        grads.append(g)
    return grads


def max_relative_error(analytic, numeric, floor=1e-6):
    scale = max(np.abs(analytic).max(initial=0.0), np.abs(numeric).max(initial=0.0), floor)
    return float(np.abs(analytic - numeric).max(initial=0.0) / scale)


def gradcheck(fn, inputs, h=1e-4, rtol=1e-3):
    """Compare backward-pass gradients of ``fn`` with central differences.

    The error of each input is measured relative to that input's largest
    gradient magnitude. Returns ``(ok, worst_error)``.
    """
    for t in inputs:
        t.grad = None
    fn().backward()
    analytic = [np.zeros(t.shape) if t.grad is None else t.grad.astype(np.float64) for t in inputs]
    numeric = numerical_grad(fn, inputs, h)
    worst = max(max_relative_error(a, n) for a, n in zip(analytic, numeric))
    return worst <= rtol, worst
