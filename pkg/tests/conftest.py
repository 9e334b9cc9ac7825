"""Shared oracles: finite-difference gradients and the closed-form Bayes
error of the two-gaussians benchmark. These stay independent of the package
code paths they check."""

import math

import numpy as np
import pytest

from pujoint import nn


def flatten_params(model):
    return np.concatenate([p.ravel() for p in model.weights + model.biases])


def set_params(model, flat):
    pos = 0
    for p in model.weights + model.biases:
        p[...] = flat[pos:pos + p.size].reshape(p.shape)
        pos += p.size


def flatten_grads(grads):
    return np.concatenate([g.ravel() for g in grads.weights + grads.biases])


def fd_gradient(model, scalar_loss, step=1e-5):
    """Central finite differences of scalar_loss(model) w.r.t. every
    parameter, at the model's current parameters."""
    theta = flatten_params(model).copy()
    grad = np.empty_like(theta)
    for i in range(theta.size):
        bumped = theta.copy()
        bumped[i] = theta[i] + step
        set_params(model, bumped)
        hi = scalar_loss(model)
        bumped[i] = theta[i] - step
        set_params(model, bumped)
        lo = scalar_loss(model)
        grad[i] = (hi - lo) / (2.0 * step)
    set_params(model, theta)
    return grad


def max_relative_error(a, b, floor=1e-6):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / denom))


def gradcheck(model, loss_and_upstream, X, step=1e-5):
    """Compare nn.backward against central differences on a composed scalar
    loss. loss_and_upstream(sigma) -> (value, d value / d sigma)."""
    def scalar(m):
        return loss_and_upstream(nn.forward(m, X))[0]

    _, upstream = loss_and_upstream(nn.forward(model, X))
    analytic = flatten_grads(nn.backward(model, X, upstream))
    numeric = fd_gradient(model, scalar, step=step)
    return max_relative_error(analytic, numeric)


def std_normal_cdf(x):
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def gaussian_bayes_error(center, noise, pi_p, dim=2):
    """Bayes error of N(+center*1, noise^2 I) vs N(-center*1, noise^2 I)
    with prior pi_p, from the 1-d projection onto the mean axis."""
    m = center * math.sqrt(dim) / noise
    if m == 0.0:
        return min(pi_p, 1.0 - pi_p)
    t = math.log((1.0 - pi_p) / pi_p) / (2.0 * m)
    return pi_p * std_normal_cdf(t - m) + (1.0 - pi_p) * std_normal_cdf(-t - m)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
