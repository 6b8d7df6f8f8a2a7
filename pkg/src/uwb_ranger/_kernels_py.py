"""Pure numpy fallback for the compiled kernel core (same signatures)."""

import numpy as np


def sqdist(x, y):
    out = np.zeros((x.shape[0], y.shape[0]))
    # Per-coordinate accumulation avoids the cancellation of |x|^2 + |y|^2 - 2xy.
    for t in range(x.shape[1]):
        diff = x[:, t, None] - y[None, :, t]
        out += diff * diff
    return out


def sqdist_sym(x):
    out = sqdist(x, x)
    np.fill_diagonal(out, 0.0)
    return out


def _ipow(base, degree):
    out = np.ones_like(base)
    b = base.copy()
    e = int(degree)
    while e > 0:
        if e & 1:
            out *= b
        b *= b
        e >>= 1
    return out


def sqexp_lin(x, y, theta0, theta1, theta2):
    return theta0 * np.exp(-theta1 * sqdist(x, y)) + theta2 * (x @ y.T)


def sqexp_lin_sym(x, theta0, theta1, theta2):
    k = theta0 * np.exp(-theta1 * sqdist_sym(x)) + theta2 * (x @ x.T)
    return 0.5 * (k + k.T)


def poly(x, y, degree, offset):
    return _ipow(x @ y.T + offset, degree)


def poly_sym(x, degree, offset):
    g = x @ x.T
    return _ipow(0.5 * (g + g.T) + offset, degree)
