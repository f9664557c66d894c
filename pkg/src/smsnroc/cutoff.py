"""Decision-theoretic cutoff: risk, estimating function and its root."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import optimize

from . import distributions as dist
from . import numdiff
from .roc import Theta, YoudenResult, youden_empirical, youden_parametric

SCAN_POINTS = 256
ROOT_TOL = 1e-10
WIDEN_FACTOR = 1.5
MAX_EXPANSIONS = 20


class CutoffError(RuntimeError):
    """No usable cutoff; ``status`` names the reason."""

    status = "failed"


class DegenerateCutoffError(CutoffError):
    status = "degenerate"


class UnbracketedError(CutoffError):
    status = "unbracketed"


@dataclass(frozen=True)
class DecisionConfig:
    """Costs of a false positive / false negative and the class prevalences."""

    lambda0: float = 1.0
    lambda1: float = 3.0
    pi0: float = 0.9
    pi1: float = 0.1

    def __post_init__(self):
        for name in ("lambda0", "lambda1", "pi0", "pi1"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive, got {v}")
        if self.pi0 >= 1 or self.pi1 >= 1 or abs(self.pi0 + self.pi1 - 1.0) > 1e-12:
            raise ValueError("prevalences must lie in (0, 1) and sum to 1")

    @classmethod
    def from_prevalence(cls, lambda0: float, lambda1: float, pi0: float) -> "DecisionConfig":
        return cls(lambda0, lambda1, pi0, 1.0 - pi0)

    @property
    def w0(self) -> float:
        return self.lambda0 * self.pi0

    @property
    def w1(self) -> float:
        return self.lambda1 * self.pi1

    @property
    def target_ratio(self) -> float:
        return self.w0 / self.w1

    @property
    def symmetric(self) -> bool:
        return math.isclose(self.w0, self.w1, rel_tol=1e-12)

    def to_dict(self) -> dict:
        return asdict(self)


def risk(theta: Theta, cfg: DecisionConfig, c):
    """Expected weighted misclassification risk of the rule "positive if x > c"."""
    out = cfg.w1 * np.asarray(dist.cdf(theta[1], c)) + cfg.w0 * np.asarray(dist.sf(theta[0], c))
    return float(out) if out.ndim == 0 else out


def phi(theta: Theta, cfg: DecisionConfig, c):
    """Derivative of the risk in ``c``."""
    out = cfg.w1 * np.asarray(dist.pdf(theta[1], c)) - cfg.w0 * np.asarray(dist.pdf(theta[0], c))
    return float(out) if out.ndim == 0 else out


def dphi_dc(theta: Theta, cfg: DecisionConfig, c: float) -> float:
    return float(numdiff.derivative(lambda t: phi(theta, cfg, t), float(c)))


def slope_diagnostic(theta: Theta, cfg: DecisionConfig, c: float) -> float:
    """Local identifiability |d phi / dc| at ``c``."""
    return abs(dphi_dc(theta, cfg, c))


@dataclass
class AdmissibleInterval:
    a: float
    b: float
    bracketed: bool
    expansions: int = 0
    a0: float = float("nan")
    b0: float = float("nan")

    @property
    def initially_bracketed(self) -> bool:
        return self.bracketed and self.expansions == 0

    def to_dict(self) -> dict:
        return asdict(self)


def _identical(theta: Theta) -> bool:
    return theta[0] == theta[1]


def bracket(theta: Theta, cfg: DecisionConfig, a: float, b: float) -> AdmissibleInterval:
    """Check phi(a) < 0 < phi(b), widening symmetrically until it holds."""
    a0, b0 = float(a), float(b)
    if not a0 < b0:
        raise ValueError("interval must satisfy a < b")
    centre, half = 0.5 * (a0 + b0), 0.5 * (b0 - a0)
    lo, hi = a0, b0
    for k in range(MAX_EXPANSIONS + 1):
        if k:
            half *= WIDEN_FACTOR
            lo, hi = centre - half, centre + half
        try:
            ok = phi(theta, cfg, lo) < 0 < phi(theta, cfg, hi)
        except (ValueError, FloatingPointError):
            ok = False
        if ok:
            return AdmissibleInterval(lo, hi, True, k, a0, b0)
    return AdmissibleInterval(a0, b0, False, MAX_EXPANSIONS, a0, b0)


def model_interval(theta: Theta, alpha_tail: float = 0.01) -> tuple[float, float]:
    lo_p, hi_p = alpha_tail / 2.0, 1.0 - alpha_tail / 2.0
    q = [(dist.quantile(s, lo_p), dist.quantile(s, hi_p)) for s in theta]
    return min(q[0][0], q[1][0]), max(q[0][1], q[1][1])


def admissible_interval(theta: Theta, cfg: DecisionConfig, alpha_tail: float = 0.01) -> AdmissibleInterval:
    """Interval spanning the central ``1 - alpha_tail`` mass of both fitted laws."""
    a, b = model_interval(theta, alpha_tail)
    return bracket(theta, cfg, a, b)


def admissible_interval_empirical(pooled, theta: Theta, cfg: DecisionConfig,
                                  lo: float = 0.005, hi: float = 0.995) -> AdmissibleInterval:
    """Interval between extreme percentiles of the pooled observations."""
    x = np.asarray(pooled, dtype=float)
    if x.size == 0:
        raise ValueError("pooled data must be non-empty")
    a, b = np.quantile(x, [lo, hi])
    if not a < b:
        return AdmissibleInterval(float(a), float(b), False, 0, float(a), float(b))
    return bracket(theta, cfg, float(a), float(b))


def sign_changes(theta: Theta, cfg: DecisionConfig, a: float, b: float, points: int = SCAN_POINTS) -> int:
    vals = np.asarray(phi(theta, cfg, np.linspace(a, b, points)))
    s = np.sign(vals)
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


def upcrossings(theta: Theta, cfg: DecisionConfig, a: float, b: float,
                points: int = SCAN_POINTS) -> list[tuple[float, float]]:
    """Grid cells where phi goes from negative to positive (local risk minima)."""
    grid = np.linspace(a, b, points)
    vals = np.asarray(phi(theta, cfg, grid))
    cells = []
    for i in range(points - 1):
        if vals[i] < 0 and vals[i + 1] >= 0:
            cells.append((float(grid[i]), float(grid[i + 1])))
    return cells


@dataclass
class CutoffResult:
    c_star: float
    risk_at_c_star: float
    c_youden: float
    risk_at_youden: float
    slope_diag: float
    dphi_dc: float
    target_ratio: float
    interval: AdmissibleInterval
    sign_changes: int = 1
    local_minima: int = 1
    youden_interior: bool = True
    c_youden_emp: float | None = None
    risk_at_youden_emp: float | None = None
    cfg: DecisionConfig = field(default_factory=DecisionConfig)

    @property
    def multi_root(self) -> bool:
        # a down-crossing of phi is a risk maximum; only competing minima
        # make the cutoff ambiguous
        return self.local_minima != 1

    @property
    def delta_risk(self) -> float:
        return self.risk_at_youden - self.risk_at_c_star

    def to_dict(self, log10: bool = False) -> dict:
        d = {
            "c_star": self.c_star,
            "risk_at_c_star": self.risk_at_c_star,
            "c_youden": self.c_youden,
            "risk_at_youden": self.risk_at_youden,
            "delta_risk": self.delta_risk,
            "c_youden_emp": self.c_youden_emp,
            "risk_at_youden_emp": self.risk_at_youden_emp,
            "slope_diag": self.slope_diag,
            "target_ratio": self.target_ratio,
            "sign_changes": self.sign_changes,
            "local_minima": self.local_minima,
            "multi_root": self.multi_root,
            "youden_interior": self.youden_interior,
            "interval": self.interval.to_dict(),
            "config": self.cfg.to_dict(),
        }
        if log10:
            d["original_scale"] = {
                k: (None if d[k] is None else 10.0 ** d[k]) for k in ("c_star", "c_youden", "c_youden_emp")
            }
        return d


def solve_root(theta: Theta, cfg: DecisionConfig, a: float, b: float) -> float:
    """Bracketed root of phi on [a, b] (Brent's method)."""
    f = lambda c: phi(theta, cfg, c)
    c = optimize.brentq(f, a, b, xtol=ROOT_TOL * (b - a), rtol=4 * np.finfo(float).eps, maxiter=500)
    if abs(f(c)) >= ROOT_TOL:
        # tighten on the last bracket if the density scale makes |phi| large
        c = optimize.brentq(f, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=1000)
    return float(c)


def _scan_minimum(theta: Theta, cfg: DecisionConfig, a: float, b: float) -> tuple[float, int]:
    """Lowest-risk interior root of phi found from the grid scan."""
    cells = upcrossings(theta, cfg, a, b)
    if not cells:
        raise UnbracketedError("estimating function has no upward sign change on the admissible interval")
    roots = [solve_root(theta, cfg, lo, hi) for lo, hi in cells]
    risks = [risk(theta, cfg, c) for c in roots]
    return roots[int(np.argmin(risks))], len(cells)


def optimal_cutoff(theta: Theta, cfg: DecisionConfig, interval: AdmissibleInterval,
                   data0=None, data1=None, allow_unbracketed: bool = False) -> CutoffResult:
    """Risk-minimising threshold together with Youden comparisons.

    Raises ``DegenerateCutoffError`` for identical laws and
    ``UnbracketedError`` when phi(a) < 0 < phi(b) could not be established.
    With ``allow_unbracketed`` the original interval is scanned instead and
    the lowest-risk local minimum is returned; this happens when one fitted
    law has the heavier tail, so phi turns negative again far out and no
    widening can bracket it.
    """
    if _identical(theta):
        raise DegenerateCutoffError("identical class distributions: every threshold is equally good")
    if interval.bracketed:
        a, b = interval.a, interval.b
        c_star = solve_root(theta, cfg, a, b)
    elif allow_unbracketed:
        a, b = interval.a0, interval.b0
        c_star, _ = _scan_minimum(theta, cfg, a, b)
    else:
        raise UnbracketedError("estimating function does not change sign on the admissible interval")
    slope = dphi_dc(theta, cfg, c_star)
    yr: YoudenResult = youden_parametric(theta, (a, b))
    res = CutoffResult(
        c_star=c_star,
        risk_at_c_star=risk(theta, cfg, c_star),
        c_youden=yr.c_y,
        risk_at_youden=risk(theta, cfg, yr.c_y),
        slope_diag=abs(slope),
        dphi_dc=slope,
        target_ratio=cfg.target_ratio,
        interval=interval,
        sign_changes=sign_changes(theta, cfg, a, b),
        local_minima=len(upcrossings(theta, cfg, a, b)),
        youden_interior=yr.interior,
        cfg=cfg,
    )
    if data0 is not None and data1 is not None:
        emp = youden_empirical(data0, data1)
        res.c_youden_emp = emp.c_y
        res.risk_at_youden_emp = risk(theta, cfg, emp.c_y)
    return res


def log_lr_slope(theta: Theta, c: float) -> float:
    """d/dc log(f1/f0) from density derivatives."""
    h = 1e-4 * (1.0 + abs(c))
    d1 = float(numdiff.derivative(lambda t: dist.pdf(theta[1], t), c, h))
    d0 = float(numdiff.derivative(lambda t: dist.pdf(theta[0], t), c, h))
    return (d1 - d0) / dist.pdf(theta[1], c)


@dataclass(frozen=True)
class Displacement:
    exact: float
    first_order: float
    c_star: float
    c_youden: float
    dg_dc: float


def youden_displacement(theta: Theta, cfg: DecisionConfig, interval: AdmissibleInterval | None = None) -> Displacement:
    """Shift of the optimal cutoff away from the Youden cutoff.

    ``first_order`` divides the log target ratio by the slope of the log
    likelihood ratio at the Youden point.
    """
    if interval is None:
        interval = admissible_interval(theta, cfg)
    res = optimal_cutoff(theta, cfg, interval)
    c_y = res.c_youden
    dg = log_lr_slope(theta, c_y)
    if abs(dg) < 1e-8:
        raise DegenerateCutoffError("log likelihood ratio is flat at the Youden cutoff")
    first = math.log(cfg.target_ratio) / dg
    return Displacement(res.c_star - c_y, first, res.c_star, c_y, dg)
