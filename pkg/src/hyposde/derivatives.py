"""Central finite differences on batched vector fields.

Every function accepts states with arbitrary leading batch axes; the last
axis is the state coordinate.  Steps scale with the state magnitude so that
the same rule works for positions of order 1e-3 and 1e4.
"""

import numpy as np


EPS = np.finfo(float).eps
FIRST_ORDER_STEP = EPS ** (1.0 / 3.0)
# Directional derivatives feed the generator fallback and Lie brackets, where
# fields of size 1e3 are common.  One Richardson step on a larger base step
# keeps truncation at O(h^4) while cutting the rounding error by (h / h_plain)^k.
DIRECTIONAL_STEP = 1e-3
SECOND_DIRECTIONAL_STEP = 1e-2


def _unit_direction(x, v, base):
    """Split ``v`` into a max-norm unit direction and its norm; the step is ``base`` times the state scale."""
    scale = np.maximum(1.0, np.max(np.abs(x), axis=-1, keepdims=True))
    vnorm = np.max(np.abs(v), axis=-1, keepdims=True)
    active = vnorm > 0.0
    u = v / np.where(active, vnorm, 1.0)
    return u, base * scale, vnorm, active


def _richardson(stencil, h):
    return (4.0 * stencil(h / 2.0) - stencil(h)) / 3.0


def directional_derivative(f, x, v):
    """d/dt f(x + t v) at t = 0 by Richardson-extrapolated central differences.

    ``v`` is frozen at its value at ``x``; rows with ``v == 0`` return 0.
    """
    x = np.asarray(x, dtype=float)
    v = np.broadcast_to(np.asarray(v, dtype=float), x.shape)
    u, h, vnorm, active = _unit_direction(x, v, DIRECTIONAL_STEP)
    out = _richardson(lambda s: (f(x + s * u) - f(x - s * u)) / (2.0 * s), h) * vnorm
    return np.where(active, out, 0.0)


def second_directional_derivative(f, x, v):
    """d^2/dt^2 f(x + t v) at t = 0, same construction as ``directional_derivative``."""
    x = np.asarray(x, dtype=float)
    v = np.broadcast_to(np.asarray(v, dtype=float), x.shape)
    u, h, vnorm, active = _unit_direction(x, v, SECOND_DIRECTIONAL_STEP)
    fx = f(x)
    out = _richardson(lambda s: (f(x + s * u) - 2.0 * fx + f(x - s * u)) / (s * s), h) * (vnorm * vnorm)
    return np.where(active, out, 0.0)


def jacobian(f, x, coords=None):
    """Jacobian of ``f`` w.r.t. the coordinates ``coords`` of ``x``.

    Returns an array of shape ``batch + (out_dim, len(coords))``.
    """
    x = np.asarray(x, dtype=float)
    if coords is None:
        coords = range(x.shape[-1])
    cols = []
    for i in coords:
        h = FIRST_ORDER_STEP * np.maximum(1.0, np.abs(x[..., i]))
        xp = x.copy()
        xm = x.copy()
        xp[..., i] += h
        xm[..., i] -= h
        step = (xp[..., i] - xm[..., i])[..., None]
        cols.append((f(xp) - f(xm)) / step)
    return np.stack(cols, axis=-1)


def gradient_fd(f, theta, steps):
    """Central-difference gradient of a scalar function of a parameter vector."""
    theta = np.asarray(theta, dtype=float)
    g = np.empty_like(theta)
    for k in range(theta.size):
        tp = theta.copy()
        tm = theta.copy()
        tp[k] += steps[k]
        tm[k] -= steps[k]
        g[k] = (f(tp) - f(tm)) / (tp[k] - tm[k])
    return g


def gradient_fd5(f, theta, steps):
    """Five-point central-difference gradient (fourth-order accurate)."""
    theta = np.asarray(theta, dtype=float)
    g = np.empty_like(theta)
    for k in range(theta.size):
        vals = []
        for m in (-2, -1, 1, 2):
            t = theta.copy()
            t[k] += m * steps[k]
            vals.append(f(t))
        g[k] = (vals[0] - 8.0 * vals[1] + 8.0 * vals[2] - vals[3]) / (12.0 * steps[k])
    return g
