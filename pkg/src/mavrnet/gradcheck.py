"""Central finite-difference gradient verification (f64 only)."""

import numpy as np

from .tensor import Tensor, no_grad


def numeric_gradients(scalar_fn, arrays, h: float = 1e-5):
    """Central-difference gradients of scalar_fn(*arrays) for each input.

    Arrays must be f64; they are perturbed in place and restored.
    """
    grads = []
    for base in arrays:
        grad = np.zeros_like(base)
        flat = base.reshape(-1)
        gflat = grad.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + h
            hi = scalar_fn(*arrays)
            flat[j] = orig - h
            lo = scalar_fn(*arrays)
            flat[j] = orig
            gflat[j] = (hi - lo) / (2 * h)
        grads.append(grad)
    return grads


def check_gradients(fn, arrays, h: float = 1e-5, tol: float = 1e-4):
    """Compare reverse-mode and finite-difference gradients of a scalar fn.

    `fn` maps Tensors to a scalar Tensor. Returns the worst relative error
    across inputs (array-wise max-norm); raises AssertionError above `tol`.
    """
    arrays = [np.asarray(a, dtype=np.float64).copy() for a in arrays]
    tensors = [Tensor(a.copy(), requires_grad=True) for a in arrays]
    loss = fn(*tensors)
    if loss.size != 1:
        raise ValueError("gradient check needs a scalar loss")
    loss.backward()
    analytic = [t.grad if t.grad is not None else np.zeros_like(t.data) for t in tensors]

    def scalar_fn(*args):
        with no_grad():
            return float(fn(*[Tensor(a) for a in args]).data)

    numeric = numeric_gradients(scalar_fn, arrays, h=h)

    worst = 0.0
    for a, n in zip(analytic, numeric):
        scale = max(np.abs(a).max(initial=0.0), np.abs(n).max(initial=0.0), 1e-8)
        err = np.abs(a - n).max(initial=0.0) / scale
        worst = max(worst, err)
    assert worst <= tol, f"gradient mismatch: max relative error {worst:.3e} > {tol:g}"
    return worst
