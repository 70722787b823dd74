"""Central finite differences used as fallbacks when analytic derivatives are missing.

The step is scale aware: ``h = 1e-6 * (1 + ||x||)``.
"""

import numpy as np

REL_STEP = 1e-6


def step_for(x):
    return REL_STEP * (1.0 + float(np.linalg.norm(x)))


def jacobian(fn, x, h=None):
    """Central-difference Jacobian of ``fn`` at ``x``; output has shape fn(x).shape + (len(x),)."""
    x = np.asarray(x, dtype=float)
    if h is None:
        h = step_for(x)
    cols = []
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        cols.append((np.asarray(fn(x + e)) - np.asarray(fn(x - e))) / (2.0 * h))
    return np.stack(cols, axis=-1)


def directional(fn, x, v, h=None):
    """Central-difference derivative of ``fn`` at ``x`` along ``v``."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if h is None:
        h = step_for(x)
    return (np.asarray(fn(x + h * v)) - np.asarray(fn(x - h * v))) / (2.0 * h)


def gradient(fn, x, h=None):
    """Central-difference gradient of a scalar function."""
    return jacobian(lambda z: np.asarray(fn(z), dtype=float).reshape(()), x, h)
