"""Per-group maximum likelihood for skew-normal / skew-t laws."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, stats

from . import numdiff
from .distributions import (
    DistSpec,
    Family,
    from_unconstrained,
    sn_logpdf,
    st_logpdf,
    to_unconstrained,
)

log = logging.getLogger(__name__)

MIN_GROUP_SIZE = 20
GRAD_TOL = 1e-5
EIG_FLOOR = 1e-8
MAX_RESTARTS = 5
# nu beyond ~3000 is indistinguishable from the skew-normal limit, and the
# t cdf loses enough accuracy further out to swamp the likelihood slope
_LOG_NU_MINUS_2_MAX = 8.0


class SingularInformationError(np.linalg.LinAlgError):
    """Observed information is not positive definite even after regularisation."""


def loglik_terms(family, theta, data) -> np.ndarray:
    family = Family(family)
    theta = np.asarray(theta, dtype=float)
    omega = math.exp(theta[1])
    if family is Family.SN:
        return sn_logpdf(data, theta[0], omega, theta[2])
    nu = 2.0 + math.exp(min(theta[3], _LOG_NU_MINUS_2_MAX))
    return st_logpdf(data, theta[0], omega, theta[2], nu)


def loglik(family, theta, data) -> float:
    """Log-likelihood of ``data`` at unconstrained parameters ``theta``."""
    try:
        val = float(np.sum(loglik_terms(family, theta, data)))
    except (OverflowError, ValueError):
        return -np.inf
    return val if np.isfinite(val) else -np.inf


def regularize_information(info: np.ndarray) -> tuple[np.ndarray, bool]:
    """Symmetrise and floor the eigenvalues of an information matrix.

    Returns the repaired matrix and whether any eigenvalue was lifted.
    """
    info = np.asarray(info, dtype=float)
    if not np.all(np.isfinite(info)):
        raise SingularInformationError("information matrix has non-finite entries")
    sym = 0.5 * (info + info.T)
    w, v = np.linalg.eigh(sym)
    top = w.max()
    if not top > 0:
        raise SingularInformationError("information matrix has no positive curvature")
    floor = EIG_FLOOR * top
    if w.min() >= floor:
        return sym, False
    w = np.maximum(w, floor)
    fixed = (v * w) @ v.T
    return 0.5 * (fixed + fixed.T), True


@dataclass
class GroupFit:
    spec: DistSpec
    loglik: float
    bic: float
    obs_info: np.ndarray | None
    n: int
    converged: bool
    iterations: int
    grad_norm: float = float("nan")
    regularized: bool = False
    fixed: tuple = ()
    message: str = ""

    @property
    def family(self) -> Family:
        return self.spec.family

    @property
    def theta(self) -> np.ndarray:
        return to_unconstrained(self.spec)

    @property
    def n_params(self) -> int:
        return self.spec.family.n_params

    @property
    def invertible(self) -> bool:
        return self.obs_info is not None

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "loglik": self.loglik,
            "bic": self.bic,
            "obs_info": None if self.obs_info is None else self.obs_info.ravel().tolist(),
            "n": self.n,
            "converged": self.converged,
            "iterations": self.iterations,
            "grad_norm": self.grad_norm,
            "regularized": self.regularized,
            "fixed": list(self.fixed),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GroupFit":
        spec = DistSpec.from_dict(d["spec"])
        p = spec.family.n_params
        info = d.get("obs_info")
        return cls(
            spec=spec,
            loglik=float(d["loglik"]),
            bic=float(d["bic"]),
            obs_info=None if info is None else np.asarray(info, float).reshape(p, p),
            n=int(d["n"]),
            converged=bool(d["converged"]),
            iterations=int(d.get("iterations", 0)),
            grad_norm=float(d.get("grad_norm", float("nan"))),
            regularized=bool(d.get("regularized", False)),
            fixed=tuple(d.get("fixed", ())),
        )


def bic(loglik_value: float, n_params: int, n: int) -> float:
    return -2.0 * loglik_value + n_params * math.log(n)


def moment_start(data, family) -> np.ndarray:
    """Method-of-moments skew-normal start, with nu = 10 for the skew-t."""
    family = Family(family)
    x = np.asarray(data, dtype=float)
    m, s = x.mean(), x.std(ddof=1)
    g = float(np.clip(stats.skew(x), -0.95, 0.95))
    r = (2.0 * abs(g) / (4.0 - math.pi)) ** (2.0 / 3.0)
    delta = math.copysign(math.sqrt(0.5 * math.pi * r / (1.0 + r)), g)
    delta = float(np.clip(delta, -0.99, 0.99))
    b = math.sqrt(2.0 / math.pi)
    omega = s / math.sqrt(1.0 - (b * delta) ** 2)
    xi = m - omega * b * delta
    alpha = delta / math.sqrt(1.0 - delta * delta)
    theta = [xi, math.log(omega), alpha]
    if family is Family.ST:
        theta.append(math.log(10.0 - 2.0))
    return np.array(theta)


def _free_mask(family, theta) -> np.ndarray:
    """Coordinates not pinned at a bound (only log(nu - 2) can be)."""
    mask = np.ones(len(theta), dtype=bool)
    if Family(family) is Family.ST and theta[3] >= _LOG_NU_MINUS_2_MAX - 1e-9:
        mask[3] = False
    return mask


def _on_free(f, theta, mask):
    base = np.array(theta, dtype=float)

    def g(free):
        full = base.copy()
        full[mask] = free
        return f(full)

    return g


def _newton_polish(family, theta, data, max_iter=20):
    """Damped Newton steps on the total log-likelihood over free coordinates."""
    f = lambda t: loglik(family, t, data)
    theta = np.array(theta, dtype=float)
    cur = f(theta)
    for _ in range(max_iter):
        mask = _free_mask(family, theta)
        fr = _on_free(f, theta, mask)
        g = numdiff.gradient(fr, theta[mask])
        if np.linalg.norm(g) < 0.1 * GRAD_TOL:
            break
        try:
            info, _ = regularize_information(-numdiff.hessian(fr, theta[mask]))
        except SingularInformationError:
            break
        step = np.zeros_like(theta)
        step[mask] = np.linalg.solve(info, g)
        t = 1.0
        while t > 1e-6:
            cand = theta + t * step
            if family is Family.ST:
                cand[3] = min(cand[3], _LOG_NU_MINUS_2_MAX)
            val = f(cand)
            if np.isfinite(val) and val >= cur - 1e-12 * abs(cur):
                break
            t *= 0.5
        else:
            break
        theta, cur = cand, val
    return theta


def _kkt_gradient_norm(family, theta, data) -> float:
    """Gradient norm over free coordinates; infinite if a bound is not active."""
    f = lambda t: loglik(family, t, data)
    mask = _free_mask(family, theta)
    g = numdiff.gradient(_on_free(f, theta, mask), theta[mask])
    if not mask.all():
        # at the nu bound the likelihood must still be rising toward it; the
        # profile is nearly flat there, so a wide step keeps round-off out
        h = 1.0
        back = theta.copy()
        back[3] -= h
        if (f(theta) - f(back)) / h < -GRAD_TOL:
            return float("inf")
    return float(np.linalg.norm(g))


def _optimize_once(family, start, data):
    n = len(data)

    def objective(t):
        val = loglik(family, t, data)
        return -val / n if np.isfinite(val) else 1e10

    def jac(t):
        return numdiff.gradient(objective, t, levels=2)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = optimize.minimize(objective, start, jac=jac, method="BFGS", options={"gtol": 1e-9, "maxiter": 500})
        theta = np.array(res.x)
        if family is Family.ST:
            theta[3] = min(theta[3], _LOG_NU_MINUS_2_MAX)
        theta = _newton_polish(family, theta, data)
        gnorm = _kkt_gradient_norm(family, theta, data)
    return theta, loglik(family, theta, data), gnorm, int(res.nit)


def observed_information(fit: GroupFit, data) -> tuple[np.ndarray, bool]:
    """Negative Hessian of the log-likelihood at the estimate, regularised.

    Coordinates pinned at a bound get zero rows and columns.
    """
    f = lambda t: loglik(fit.family, t, data)
    theta = fit.theta
    mask = np.ones(len(theta), dtype=bool)
    mask[list(fit.fixed)] = False
    H = numdiff.hessian(_on_free(f, theta, mask), theta[mask])
    free_info, reg = regularize_information(-H)
    if reg:
        log.info("observed information regularised (eigenvalue floor %.1e)", EIG_FLOOR)
    info = np.zeros((len(theta), len(theta)))
    info[np.ix_(mask, mask)] = free_info
    return info, reg


def fit(data, family, max_restarts: int = MAX_RESTARTS, rng: np.random.Generator | None = None) -> GroupFit:
    """Maximum-likelihood fit of one group.

    Starts from moment estimates; on failure, restarts from perturbed copies
    of the best point found so far. Non-convergence is reported through
    ``converged=False``, never raised. A skew-t whose degrees of freedom run
    off to the skew-normal limit is held at the bound and reported in
    ``fixed``.
    """
    family = Family(family)
    x = np.asarray(data, dtype=float)
    if x.ndim != 1 or not np.all(np.isfinite(x)):
        raise ValueError("data must be a finite 1-d vector")
    n = x.size
    if n < MIN_GROUP_SIZE:
        raise ValueError(f"need at least {MIN_GROUP_SIZE} observations, got {n}")
    rng = np.random.default_rng(0) if rng is None else rng

    start = moment_start(x, family)
    best = None
    iterations = 0
    for attempt in range(max_restarts + 1):
        theta, ll, gnorm, nit = _optimize_once(family, start, x)
        iterations += nit
        if best is None or ll > best[1]:
            best = (theta, ll, gnorm)
        if np.isfinite(ll) and gnorm < GRAD_TOL:
            break
        start = best[0] + rng.normal(0.0, 0.5, size=best[0].shape)
        if family is Family.ST:
            start[3] = np.clip(start[3], -2.0, 6.0)

    theta, ll, gnorm = best
    converged = bool(np.isfinite(ll) and gnorm < GRAD_TOL)
    spec = from_unconstrained(family, theta)
    fixed = tuple(int(i) for i in np.flatnonzero(~_free_mask(family, theta)))
    result = GroupFit(spec=spec, loglik=ll, bic=bic(ll, family.n_params, n), obs_info=None, n=n,
                      converged=converged, iterations=iterations, grad_norm=gnorm, fixed=fixed)
    if fixed:
        result.message = "nu at upper bound (skew-normal limit)"
    if not converged:
        result.message = f"gradient norm {gnorm:.3g} after {max_restarts} restarts"
        return result
    try:
        result.obs_info, result.regularized = observed_information(result, x)
    except SingularInformationError as exc:
        result.message = str(exc)
    return result


@dataclass
class ModelSelection:
    selected: GroupFit
    delta_bic: float
    fits: dict = field(default_factory=dict)
    warning: str = ""

    @property
    def bic_sn(self) -> float:
        f = self.fits.get(Family.SN)
        return f.bic if f is not None else float("nan")

    @property
    def bic_st(self) -> float:
        f = self.fits.get(Family.ST)
        return f.bic if f is not None else float("nan")


def select_model(data, tie_tol: float = 1e-9) -> ModelSelection:
    """Fit both families and keep the lower BIC.

    ``delta_bic = BIC_SN - BIC_ST``, so positive values favour the skew-t.
    Ties go to the skew-normal.
    """
    fits = {fam: fit(data, fam) for fam in (Family.SN, Family.ST)}
    sn, st = fits[Family.SN], fits[Family.ST]
    delta = sn.bic - st.bic
    if sn.converged and st.converged:
        chosen = st if delta > tie_tol else sn
        return ModelSelection(chosen, delta, fits)
    if sn.converged or st.converged:
        chosen = sn if sn.converged else st
        other = "ST" if sn.converged else "SN"
        msg = f"{other} fit did not converge; using {chosen.family.value.upper()}"
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        return ModelSelection(chosen, delta, fits, warning=msg)
    raise RuntimeError("neither SN nor ST fit converged")


@dataclass
class JointCovariance:
    sigma: np.ndarray
    n0: int
    n1: int
    p0: int
    p1: int

    @property
    def n(self) -> int:
        return self.n0 + self.n1

    @property
    def eta0(self) -> float:
        return self.n0 / self.n

    @property
    def eta1(self) -> float:
        return self.n1 / self.n

    def block(self, k: int) -> np.ndarray:
        if k == 0:
            return self.sigma[: self.p0, : self.p0]
        return self.sigma[self.p0 :, self.p0 :]


def joint_covariance(fit0: GroupFit, fit1: GroupFit) -> JointCovariance:
    """Block-diagonal sqrt(n)-scale covariance of the stacked estimates."""
    for k, f in enumerate((fit0, fit1)):
        if not f.converged:
            raise RuntimeError(f"group {k} fit did not converge")
        if f.obs_info is None:
            raise SingularInformationError(f"group {k} information is not invertible")
    n = fit0.n + fit1.n
    blocks = []
    for f in (fit0, fit1):
        eta = f.n / n
        free = np.ones(f.n_params, dtype=bool)
        free[list(f.fixed)] = False
        cov = np.zeros((f.n_params, f.n_params))
        per_obs = f.obs_info[np.ix_(free, free)] / f.n
        cov[np.ix_(free, free)] = np.linalg.inv(per_obs) / eta
        blocks.append(cov)
    p0, p1 = fit0.n_params, fit1.n_params
    sigma = np.zeros((p0 + p1, p0 + p1))
    sigma[:p0, :p0] = 0.5 * (blocks[0] + blocks[0].T)
    sigma[p0:, p0:] = 0.5 * (blocks[1] + blocks[1].T)
    return JointCovariance(sigma, fit0.n, fit1.n, p0, p1)


def population_covariance(spec0: DistSpec, spec1: DistSpec, eta0: float = 0.5) -> np.ndarray:
    """Sigma at the true parameters from per-observation Fisher information."""
    eta1 = 1.0 - eta0
    i0 = np.linalg.inv(expected_information(spec0)) / eta0
    i1 = np.linalg.inv(expected_information(spec1)) / eta1
    p0, p1 = i0.shape[0], i1.shape[0]
    sigma = np.zeros((p0 + p1, p0 + p1))
    sigma[:p0, :p0] = i0
    sigma[p0:, p0:] = i1
    return sigma


def expected_information(spec: DistSpec, half_width: float = 12.0, m: int = 4001) -> np.ndarray:
    """Per-observation Fisher information in the unconstrained chart.

    Integrates the score outer product on ``x = xi + omega * sinh(t)``, where
    the trapezoid rule converges geometrically for both families.
    """
    t = np.linspace(-half_width, half_width, m)
    x = spec.xi + spec.omega * np.sinh(t)
    jac = spec.omega * np.cosh(t)
    theta = to_unconstrained(spec)
    score = numdiff.gradient(lambda th: loglik_terms(spec.family, th, x), theta)
    dens = np.exp(loglik_terms(spec.family, theta, x))
    w = dens * jac * (t[1] - t[0])
    return (score * w) @ score.T
