"""Richardson-extrapolated finite differences.

Central differences are evaluated on a geometric sequence of steps
``h, h/2, h/4, ...`` and combined with a Neville-style extrapolation
table that cancels the ``h**2``, ``h**4``, ... error terms in turn.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

LEVELS = 4
STEP_RATIO = 2.0


def _extrapolate(estimates: np.ndarray) -> np.ndarray:
    """Collapse a table of O(h^2)-accurate estimates along axis 0."""
    table = np.asarray(estimates, dtype=float)
    k = 1
    while table.shape[0] > 1:
        factor = STEP_RATIO ** (2 * k)
        table = (factor * table[1:] - table[:-1]) / (factor - 1.0)
        k += 1
    return table[0]


def default_steps(x: np.ndarray, rel: float = 1e-3) -> np.ndarray:
    return rel * (1.0 + np.abs(np.asarray(x, dtype=float)))


def derivative(f: Callable, x, h=None, levels: int = LEVELS):
    """First derivative of a scalar (or elementwise vector) function.

    ``f`` may return an array; the derivative is taken elementwise.
    """
    x = np.asarray(x, dtype=float)
    if h is None:
        h = 1e-4 * (1.0 + np.abs(x))
    h = np.asarray(h, dtype=float)
    rows = []
    for k in range(levels):
        hk = h / STEP_RATIO**k
        rows.append((np.asarray(f(x + hk)) - np.asarray(f(x - hk))) / (2.0 * hk))
    return _extrapolate(np.array(rows))


def gradient(f: Callable, x, h=None, levels: int = LEVELS) -> np.ndarray:
    """Gradient of ``f: R^p -> R`` (or Jacobian rows if ``f`` is vector valued).

    The returned array has the parameter index first: shape ``(p,) + f(x).shape``.
    """
    x = np.asarray(x, dtype=float)
    p = x.size
    h = default_steps(x) if h is None else np.broadcast_to(np.asarray(h, float), x.shape)
    out = []
    for j in range(p):
        rows = []
        for k in range(levels):
            hk = h[j] / STEP_RATIO**k
            xp = x.copy()
            xm = x.copy()
            xp[j] += hk
            xm[j] -= hk
            rows.append((np.asarray(f(xp), float) - np.asarray(f(xm), float)) / (2.0 * hk))
        out.append(_extrapolate(np.array(rows)))
    return np.array(out)


def hessian(f: Callable, x, h=None, levels: int = LEVELS) -> np.ndarray:
    """Symmetric Hessian of a scalar function by extrapolated central differences."""
    x = np.asarray(x, dtype=float)
    p = x.size
    h = default_steps(x) if h is None else np.broadcast_to(np.asarray(h, float), x.shape)
    f0 = float(f(x))
    H = np.empty((p, p))
    for i in range(p):
        for j in range(i, p):
            rows = []
            for k in range(levels):
                hi = h[i] / STEP_RATIO**k
                hj = h[j] / STEP_RATIO**k
                if i == j:
                    xp = x.copy()
                    xm = x.copy()
                    xp[i] += hi
                    xm[i] -= hi
                    rows.append((f(xp) - 2.0 * f0 + f(xm)) / hi**2)
                else:
                    vals = []
                    for si, sj in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                        xs = x.copy()
                        xs[i] += si * hi
                        xs[j] += sj * hj
                        vals.append(f(xs))
                    rows.append((vals[0] - vals[1] - vals[2] + vals[3]) / (4.0 * hi * hj))
            H[i, j] = H[j, i] = _extrapolate(np.array(rows, dtype=float))
    return H
