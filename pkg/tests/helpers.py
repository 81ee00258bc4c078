"""Shared test utilities: finite-difference gradient checking."""

import numpy as np

from ptrparse import autodiff as ad


def numeric_gradient(fn, tensor, h=1e-5):
    """Central-difference gradient of scalar ``fn()`` w.r.t. one tensor.

    ``fn`` must rebuild its graph on every call and read ``tensor.data``
    in place, so nudging entries changes the output.
    """
    grad = np.zeros_like(tensor.data)
    flat_data = tensor.data.reshape(-1)
    flat_grad = grad.reshape(-1)
    for i in range(flat_data.size):
        keep = flat_data[i]
        flat_data[i] = keep + h
        up = fn().item()
        flat_data[i] = keep - h
        down = fn().item()
        flat_data[i] = keep
        flat_grad[i] = (up - down) / (2.0 * h)
    return grad


def relative_error(got, want):
    """Max elementwise difference over the larger gradient's scale."""
    diff = np.abs(got - want).max(initial=0.0)
    scale = max(np.abs(got).max(initial=0.0), np.abs(want).max(initial=0.0), 1.0)
    return diff / scale


def check_gradients(fn, tensors, h=1e-5, tol=1e-4):
    """Assert reverse-mode gradients match central differences for all tensors."""
    for t in tensors:
        t.zero_grad()
    ad.backward(fn())
    worst = 0.0
    for t in tensors:
        worst = max(worst, relative_error(t.grad, numeric_gradient(fn, t, h=h)))
    assert worst < tol, f"worst relative gradient error {worst:.3e} >= {tol}"
    return worst
