import numpy as np

from emostyle.autograd.tensor import Tensor
from emostyle.errors import ShapeMismatch


class Network:
    """Named parameter container shared by the model classes.

    Subclasses register trainable tensors in ``self.params`` and
    non-trainable arrays in ``self.buffers``; both end up in checkpoints.
    """

    def __init__(self):
        self.params = {}
        self.buffers = {}

    def parameters(self):
        return list(self.params.values())

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def state_dict(self):
        state = {name: p.data for name, p in self.params.items()}
        state.update(self.buffers)
        return state

    def load_state_dict(self, state, prefix=""):
        for name, p in self.params.items():
            arr = np.asarray(state[prefix + name])
            if arr.shape != p.shape:
                raise ShapeMismatch(f"{prefix + name}: expected {p.shape}, got {arr.shape}")
            p.data = arr.astype(p.dtype).copy()
        for name, buf in self.buffers.items():
            arr = np.asarray(state[prefix + name])
            if arr.shape != buf.shape:
                raise ShapeMismatch(f"{prefix + name}: expected {buf.shape}, got {arr.shape}")
            self.buffers[name] = arr.astype(buf.dtype).copy()
        return self

    def astype(self, dtype):
        """Cast every parameter in place (float64 is used for gradient checks)."""
        for name, p in self.params.items():
            self.params[name] = Tensor(p.data.astype(dtype), requires_grad=True)
        for name, buf in self.buffers.items():
            self.buffers[name] = buf.astype(dtype)
        return self

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)
