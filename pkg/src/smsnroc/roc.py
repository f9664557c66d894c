"""Parametric ROC curve, AUC and Youden cutoffs for a pair of fitted laws.

``theta`` is always the pair ``(spec0, spec1)``: the non-diseased law first.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from . import distributions as dist
from .distributions import DistSpec

Theta = tuple[DistSpec, DistSpec]


class YoudenMethod(str, enum.Enum):
    PARAMETRIC = "parametric"
    EMPIRICAL = "empirical"


@dataclass(frozen=True)
class YoudenResult:
    c_y: float
    j: float
    method: YoudenMethod
    interior: bool = True


@dataclass
class RocCurve:
    fpf: np.ndarray
    tpf: np.ndarray
    theta: Theta

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.fpf.tolist(), self.tpf.tolist()))

    def to_csv(self, path) -> None:
        np.savetxt(path, np.column_stack([self.fpf, self.tpf]), delimiter=",",
                   header="fpf,tpf", comments="", fmt="%.10g")

    def to_dict(self) -> dict:
        return {"fpf": self.fpf.tolist(), "tpf": self.tpf.tolist(),
                "theta": [s.to_dict() for s in self.theta]}


def roc_point(theta: Theta, r):
    """Operating point with false-positive fraction ``r``."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr <= 0) or np.any(r_arr >= 1):
        raise ValueError("roc_point requires 0 < r < 1")
    c = dist.quantile(theta[0], 1.0 - r_arr)
    tpf = dist.sf(theta[1], c)
    if r_arr.ndim == 0:
        return float(r_arr), float(tpf)
    return r_arr, np.asarray(tpf)


def roc_curve(theta: Theta, m: int = 200) -> RocCurve:
    r = np.linspace(0.0, 1.0, m + 1)[1:-1]
    _, tpf = roc_point(theta, r)
    fpf = np.concatenate([[0.0], r, [1.0]])
    tpf = np.concatenate([[0.0], tpf, [1.0]])
    return RocCurve(fpf, tpf, theta)


def log_likelihood_ratio(theta: Theta, c):
    return dist.logpdf(theta[1], c) - dist.logpdf(theta[0], c)


def likelihood_ratio(theta: Theta, c):
    """f1(c) / f0(c), evaluated as a difference of log densities."""
    g = np.asarray(log_likelihood_ratio(theta, c))
    if np.any(~np.isfinite(g)):
        raise FloatingPointError("both densities underflow at c")
    out = np.exp(g)
    return float(out) if out.ndim == 0 else out


def auc(theta: Theta, h: int = 1000) -> float:
    """Trapezoidal-rule area under the parametric ROC curve on a grid of ``h`` cells."""
    if h < 10:
        raise ValueError("h must be at least 10")
    u = np.arange(1, h) / h
    q0 = dist.quantile(theta[0], u)
    inner = np.sum(np.asarray(dist.sf(theta[1], q0)))
    return float((0.5 + inner) / h)


def youden_index(theta: Theta, c):
    """J(c) = F0(c) - F1(c)."""
    return np.asarray(dist.cdf(theta[0], c)) - np.asarray(dist.cdf(theta[1], c))


def youden_parametric(theta: Theta, interval: tuple[float, float], scan: int = 64) -> YoudenResult:
    """Maximiser of J on ``[a, b]``.

    Local maxima of J are the down-crossings of f0 - f1 located on a scan
    grid; if none exists, J is maximised directly by bounded search and the
    result is flagged when it lands on the boundary.
    """
    a, b = map(float, interval)
    if not a < b:
        raise ValueError("interval must satisfy a < b")
    d = lambda c: dist.pdf(theta[0], c) - dist.pdf(theta[1], c)
    grid = np.linspace(a, b, scan)
    dg = np.asarray(d(grid))
    roots = []
    for i in range(scan - 1):
        if dg[i] > 0 and dg[i + 1] < 0:
            roots.append(optimize.brentq(d, grid[i], grid[i + 1], xtol=1e-13, rtol=4 * np.finfo(float).eps))
        elif dg[i + 1] == 0 and i + 1 < scan - 1 and dg[i] > 0 and dg[i + 2] < 0:
            roots.append(float(grid[i + 1]))
    if roots:
        js = [float(youden_index(theta, r)) for r in roots]
        k = int(np.argmax(js))
        return YoudenResult(roots[k], js[k], YoudenMethod.PARAMETRIC, True)
    res = optimize.minimize_scalar(lambda c: -float(youden_index(theta, c)), bounds=(a, b),
                                   method="bounded", options={"xatol": 1e-10 * (b - a)})
    c = float(res.x)
    cands = [(c, float(youden_index(theta, c))), (a, float(youden_index(theta, a))),
             (b, float(youden_index(theta, b)))]
    c, j = max(cands, key=lambda t: t[1])
    interior = (c - a) > 1e-6 * (b - a) and (b - c) > 1e-6 * (b - a)
    if not interior:
        warnings.warn("Youden maximiser lies on the interval boundary", RuntimeWarning, stacklevel=2)
    return YoudenResult(c, j, YoudenMethod.PARAMETRIC, interior)


def empirical_index(data0, data1, c):
    """Empirical Se + Sp - 1 at threshold(s) ``c`` (positive means x > c)."""
    x0 = np.sort(np.asarray(data0, dtype=float))
    x1 = np.sort(np.asarray(data1, dtype=float))
    c = np.asarray(c, dtype=float)
    spec_ = np.searchsorted(x0, c, side="right") / x0.size
    sens = 1.0 - np.searchsorted(x1, c, side="right") / x1.size
    return sens + spec_ - 1.0


def youden_empirical(data0, data1) -> YoudenResult:
    """Empirical Youden cutoff over order statistics and their midpoints.

    Ties are broken toward the smallest maximising threshold.
    """
    x0 = np.asarray(data0, dtype=float)
    x1 = np.asarray(data1, dtype=float)
    if x0.size == 0 or x1.size == 0:
        raise ValueError("both samples must be non-empty")
    pooled = np.unique(np.concatenate([x0, x1]))
    cands = np.sort(np.concatenate([pooled, 0.5 * (pooled[:-1] + pooled[1:])]))
    j = empirical_index(x0, x1, cands)
    k = int(np.argmax(j))
    return YoudenResult(float(cands[k]), float(j[k]), YoudenMethod.EMPIRICAL, True)


def roc_slope(theta: Theta, c: float, h: float | None = None) -> float:
    """Numerical dTPF/dFPF at threshold ``c``."""
    h = 1e-4 * (1.0 + abs(c)) if h is None else h
    tp = dist.sf(theta[1], c + h) - dist.sf(theta[1], c - h)
    fp = dist.sf(theta[0], c + h) - dist.sf(theta[0], c - h)
    return float(tp / fp)


def tangent_line(theta: Theta, c: float, slope: float | None = None) -> dict:
    """Anchor and slope of the ROC tangent at the operating point of ``c``."""
    fpf = float(dist.sf(theta[0], c))
    tpf = float(dist.sf(theta[1], c))
    s = likelihood_ratio(theta, c) if slope is None else slope
    return {"c": c, "fpf": fpf, "tpf": tpf, "slope": float(s), "intercept": tpf - float(s) * fpf}


__all__ = [
    "RocCurve", "YoudenMethod", "YoudenResult", "auc", "empirical_index", "likelihood_ratio",
    "log_likelihood_ratio", "roc_curve", "roc_point", "roc_slope", "tangent_line",
    "youden_empirical", "youden_index", "youden_parametric",
]
