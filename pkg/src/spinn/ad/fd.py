"""Central finite differences, used as an independent check on the AD paths."""

import numpy as np


def fd_derivative(f, x, order=1, h=1e-4):
    if h <= 0:
        raise ValueError("step must be positive")
    if order == 1:
        return (f(x + h) - f(x - h)) / (2.0 * h)
    if order == 2:
        return (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h)
    raise ValueError(f"order must be 1 or 2, got {order}")


def fd_gradient(f, theta, h=1e-6):
    """Central-difference gradient of a scalar function of a flat vector."""
    theta = np.array(theta, dtype=np.float64)
    grad = np.empty_like(theta)
    for i in range(theta.size):
        orig = theta[i]
        theta[i] = orig + h
        fp = f(theta)
        theta[i] = orig - h
        fm = f(theta)
        theta[i] = orig
        grad[i] = (fp - fm) / (2.0 * h)
    return grad
