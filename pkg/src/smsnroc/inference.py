"""Plug-in delta-method variance and Wald interval for the optimal cutoff."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import special

from . import numdiff
from .cutoff import DecisionConfig, dphi_dc, optimal_cutoff, admissible_interval
from .distributions import from_unconstrained, pdf, to_unconstrained
from .fitting import JointCovariance, population_covariance
from .roc import Theta

FLAT_SLOPE = 1e-3
Z_975 = 1.95996398454005


class IdentifiabilityError(ZeroDivisionError):
    """The estimating function has zero slope at the cutoff."""


def z_quantile(alpha: float = 0.05) -> float:
    """Two-sided standard normal critical value z_{1 - alpha/2}."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if alpha == 0.05:
        return Z_975
    return float(special.ndtri(1.0 - alpha / 2.0))


@dataclass
class CutoffInference:
    v_hat: float
    se: float
    ci_lo: float
    ci_hi: float
    grad_phi_theta: np.ndarray
    dphi_dc: float
    n: int
    alpha: float = 0.05
    low_identifiability: bool = False
    group_terms: tuple[float, float] = (float("nan"), float("nan"))

    def to_dict(self) -> dict:
        return {
            "v_hat": self.v_hat,
            "se": self.se,
            "ci_lo": self.ci_lo,
            "ci_hi": self.ci_hi,
            "alpha": self.alpha,
            "grad_phi_theta": self.grad_phi_theta.tolist(),
            "dphi_dc": self.dphi_dc,
            "n": self.n,
            "low_identifiability": self.low_identifiability,
            "group_terms": list(self.group_terms),
        }


def _pdf_gradient(spec, c: float) -> np.ndarray:
    """Gradient of the density at ``c`` in the unconstrained parameters."""
    fam = spec.family
    return numdiff.gradient(lambda v: pdf(from_unconstrained(fam, v), c), to_unconstrained(spec))


def grad_phi_in_theta(theta: Theta, cfg: DecisionConfig, c: float) -> np.ndarray:
    """Stacked gradient of phi in (theta0, theta1)."""
    g0 = _pdf_gradient(theta[0], c)
    g1 = _pdf_gradient(theta[1], c)
    return np.concatenate([-cfg.w0 * g0, cfg.w1 * g1])


def asymptotic_variance(grad: np.ndarray, sigma: np.ndarray, slope: float, p0: int) -> tuple[float, float, float]:
    """Sandwich ``grad' sigma grad / slope^2`` and its two block contributions."""
    if slope == 0:
        raise IdentifiabilityError("d phi / dc is exactly zero")
    g0, g1 = grad[:p0], grad[p0:]
    t0 = float(g0 @ sigma[:p0, :p0] @ g0) / slope**2
    t1 = float(g1 @ sigma[p0:, p0:] @ g1) / slope**2
    total = float(grad @ sigma @ grad) / slope**2
    return total, t0, t1


def wald_ci(c_hat: float, se: float, alpha: float = 0.05) -> tuple[float, float]:
    z = z_quantile(alpha)
    return c_hat - z * se, c_hat + z * se


def variance_plugin(theta_hat: Theta, cfg: DecisionConfig, c_hat: float, sigma: JointCovariance,
                    alpha: float = 0.05) -> CutoffInference:
    """Plug-in variance, standard error and Wald interval for ``c_hat``."""
    grad = grad_phi_in_theta(theta_hat, cfg, c_hat)
    slope = dphi_dc(theta_hat, cfg, c_hat)
    v, t0, t1 = asymptotic_variance(grad, sigma.sigma, slope, sigma.p0)
    low = abs(slope) <= FLAT_SLOPE
    if low:
        warnings.warn(f"|d phi/dc| = {abs(slope):.2e} is below {FLAT_SLOPE}; variance is unreliable",
                      RuntimeWarning, stacklevel=2)
    se = float(np.sqrt(v / sigma.n)) if v >= 0 else float("nan")
    lo, hi = wald_ci(c_hat, se, alpha)
    return CutoffInference(v, se, lo, hi, grad, slope, sigma.n, alpha, low, (t0, t1))


def population_variance(theta: Theta, cfg: DecisionConfig, eta0: float = 0.5) -> float:
    """Asymptotic variance of sqrt(n)(c_hat - c*) at the true parameters."""
    res = optimal_cutoff(theta, cfg, admissible_interval(theta, cfg))
    sigma = population_covariance(theta[0], theta[1], eta0)
    grad = grad_phi_in_theta(theta, cfg, res.c_star)
    v, _, _ = asymptotic_variance(grad, sigma, res.dphi_dc, theta[0].family.n_params)
    return v


def cutoff_gradient(theta: Theta, cfg: DecisionConfig, c: float) -> np.ndarray:
    """Implicit-function gradient of the cutoff in the stacked parameters."""
    return -grad_phi_in_theta(theta, cfg, c) / dphi_dc(theta, cfg, c)
