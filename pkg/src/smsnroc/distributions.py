"""Skew-normal and skew-t laws.

Both families use the Azzalini parametrisation ``(xi, omega, alpha)`` with
``nu`` added for the skew-t. Optimisation and inference work in the
unconstrained chart ``(xi, log omega, alpha[, log(nu - 2)])``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize, special

LOG2 = math.log(2.0)
_QUAD_EPSABS = 1e-13
_QUAD_EPSREL = 1e-12


class Family(str, enum.Enum):
    SN = "sn"
    ST = "st"

    @property
    def n_params(self) -> int:
        return 3 if self is Family.SN else 4


@dataclass(frozen=True)
class DistSpec:
    family: Family
    xi: float
    omega: float
    alpha: float
    nu: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if not (np.isfinite(self.xi) and np.isfinite(self.alpha)):
            raise ValueError("xi and alpha must be finite")
        if not self.omega > 0 or not np.isfinite(self.omega):
            raise ValueError(f"omega must be positive, got {self.omega}")
        if self.family is Family.ST:
            if self.nu is None or not self.nu > 2:
                raise ValueError(f"skew-t requires nu > 2, got {self.nu}")
        elif self.nu is not None:
            raise ValueError("nu is only defined for the skew-t family")

    @classmethod
    def sn(cls, xi, omega, alpha) -> "DistSpec":
        return cls(Family.SN, float(xi), float(omega), float(alpha))

    @classmethod
    def st(cls, xi, omega, alpha, nu) -> "DistSpec":
        return cls(Family.ST, float(xi), float(omega), float(alpha), float(nu))

    @property
    def delta(self) -> float:
        return self.alpha / math.sqrt(1.0 + self.alpha**2)

    def to_dict(self) -> dict:
        d = {"family": self.family.value, "xi": self.xi, "omega": self.omega, "alpha": self.alpha}
        if self.family is Family.ST:
            d["nu"] = self.nu
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DistSpec":
        fam = Family(d["family"])
        nu = d.get("nu") if fam is Family.ST else None
        return cls(fam, float(d["xi"]), float(d["omega"]), float(d["alpha"]),
                   None if nu is None else float(nu))

    def shifted(self, scale: float, shift: float) -> "DistSpec":
        """Law of ``scale * X + shift`` for ``scale > 0``."""
        if scale <= 0:
            raise ValueError("scale must be positive")
        return DistSpec(self.family, scale * self.xi + shift, scale * self.omega, self.alpha, self.nu)


def to_unconstrained(spec: DistSpec) -> np.ndarray:
    v = [spec.xi, math.log(spec.omega), spec.alpha]
    if spec.family is Family.ST:
        v.append(math.log(spec.nu - 2.0))
    return np.array(v, dtype=float)


def from_unconstrained(family, v) -> DistSpec:
    family = Family(family)
    v = np.asarray(v, dtype=float)
    if v.shape != (family.n_params,):
        raise ValueError(f"{family.value} expects {family.n_params} parameters, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("unconstrained parameters must be finite")
    nu = 2.0 + math.exp(v[3]) if family is Family.ST else None
    return DistSpec(family, float(v[0]), math.exp(v[1]), float(v[2]), nu)


def _check_finite(x):
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("x must be finite")
    return x


# ---------------------------------------------------------------------------
# log densities on raw parameter arrays (broadcastable); used by the fitter


def sn_logpdf(x, xi, omega, alpha):
    z = (x - xi) / omega
    return LOG2 - np.log(omega) - 0.5 * z * z - 0.5 * math.log(2 * math.pi) + special.log_ndtr(alpha * z)


def _t_logpdf(z, nu):
    # betaln keeps the normalising constant accurate for very large nu
    return -special.betaln(0.5 * nu, 0.5) - 0.5 * np.log(nu) - 0.5 * (nu + 1) * np.log1p(z * z / nu)


def _t_logcdf(t, df):
    # stdtr evaluates the lower tail through the incomplete beta function,
    # so it keeps relative accuracy for large negative t; it only reaches
    # zero for extreme skewness trial points, where -inf is the right answer
    with np.errstate(divide="ignore"):
        return np.log(special.stdtr(df, t))


def st_logpdf(x, xi, omega, alpha, nu):
    z = (x - xi) / omega
    w = alpha * z * np.sqrt((nu + 1.0) / (nu + z * z))
    return LOG2 - np.log(omega) + _t_logpdf(z, nu) + _t_logcdf(w, nu + 1.0)


def logpdf(spec: DistSpec, x):
    x = _check_finite(x)
    if spec.family is Family.SN:
        return sn_logpdf(x, spec.xi, spec.omega, spec.alpha)
    return st_logpdf(x, spec.xi, spec.omega, spec.alpha, spec.nu)


def pdf(spec: DistSpec, x):
    """Density at ``x`` (scalar or array)."""
    out = np.exp(logpdf(spec, x))
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# distribution functions


def _st_scalar_density(spec: DistSpec):
    """Scalar skew-t density closure for the quadrature inner loop."""
    xi, om, al, nu = spec.xi, spec.omega, spec.alpha, spec.nu
    c = LOG2 - math.log(om) - float(special.betaln(0.5 * nu, 0.5)) - 0.5 * math.log(nu)
    e = -0.5 * (nu + 1.0)
    nu1 = nu + 1.0
    stdtr = special.stdtr

    def f(x):
        z = (x - xi) / om
        w = al * z * math.sqrt(nu1 / (nu + z * z))
        tc = stdtr(nu1, w)
        return math.exp(c + e * math.log1p(z * z / nu)) * tc

    return f


def _st_tail_integral(spec: DistSpec, lo: float, hi: float, f=None) -> float:
    f = _st_scalar_density(spec) if f is None else f
    val, _ = integrate.quad(f, lo, hi, epsabs=_QUAD_EPSABS, epsrel=_QUAD_EPSREL, limit=200)
    return val


def _st_cdf_at_location(spec: DistSpec) -> float:
    # the sign of a skew-normal variate is unchanged by the positive mixing scale
    return 0.5 - math.atan(spec.alpha) / math.pi


def _st_cdf_scalar(spec: DistSpec, x: float, upper: bool = False) -> float:
    """Lower (or upper) tail probability by quadrature.

    Integration runs from whichever infinite end is on the same side of the
    location as ``x``, so both tails are computed without cancellation.
    """
    if x <= spec.xi:
        lower = _st_tail_integral(spec, -np.inf, x)
        return 1.0 - lower if upper else lower
    upper_tail = _st_tail_integral(spec, x, np.inf)
    return upper_tail if upper else 1.0 - upper_tail


def _sn_cdf(spec: DistSpec, x, upper: bool = False):
    z = (np.asarray(x, dtype=float) - spec.xi) / spec.omega
    t = special.owens_t(z, spec.alpha)
    if upper:
        return special.ndtr(-z) + 2.0 * t
    return special.ndtr(z) - 2.0 * t


def _st_cdf_sorted(spec: DistSpec, xs: np.ndarray, upper: bool) -> np.ndarray:
    """Tail probabilities at many points by chaining short quadratures."""
    f = _st_scalar_density(spec)
    order = np.argsort(xs)
    s = xs[order]
    lower = np.empty_like(s)
    left = s <= spec.xi
    if left.any():
        sl = s[left]
        acc = _st_tail_integral(spec, -np.inf, sl[0], f)
        vals = [acc]
        for a, b in zip(sl[:-1], sl[1:]):
            acc += _st_tail_integral(spec, a, b, f) if b > a else 0.0
            vals.append(acc)
        lower[left] = vals
    up = np.empty(0)
    if (~left).any():
        sr = s[~left][::-1]
        acc = _st_tail_integral(spec, sr[0], np.inf, f)
        vals = [acc]
        for b, a in zip(sr[:-1], sr[1:]):
            acc += _st_tail_integral(spec, a, b, f) if b > a else 0.0
            vals.append(acc)
        up = np.array(vals[::-1])
    res = np.empty_like(s)
    if upper:
        res[left] = 1.0 - lower[left]
        res[~left] = up
    else:
        res[left] = lower[left]
        res[~left] = 1.0 - up
    out = np.empty_like(res)
    out[order] = res
    return out


def _tail(spec: DistSpec, x, upper: bool):
    x = _check_finite(x)
    if spec.family is Family.SN:
        out = np.clip(_sn_cdf(spec, x, upper), 0.0, 1.0)
    elif x.ndim == 0:
        out = np.clip(_st_cdf_scalar(spec, float(x), upper), 0.0, 1.0)
    else:
        out = np.clip(_st_cdf_sorted(spec, x.ravel(), upper), 0.0, 1.0).reshape(x.shape)
    return float(out) if np.ndim(out) == 0 else out


def cdf(spec: DistSpec, x):
    """P(X <= x)."""
    return _tail(spec, x, upper=False)


def sf(spec: DistSpec, x):
    """P(X > x), computed directly rather than as ``1 - cdf``."""
    return _tail(spec, x, upper=True)


def _bracket(spec: DistSpec, p_lo: float, p_hi: float) -> tuple[float, float]:
    half = 50.0 * spec.omega
    while True:
        lo, hi = spec.xi - half, spec.xi + half
        if cdf(spec, lo) < p_lo and sf(spec, hi) < 1.0 - p_hi:
            return lo, hi
        half *= 2.0
        if half > 1e300:
            raise FloatingPointError("could not bracket quantile")


def _quantile_scalar(spec: DistSpec, p: float) -> float:
    lo, hi = _bracket(spec, p, p)
    if p <= 0.5:
        fn = lambda x: cdf(spec, x) - p
    else:
        fn = lambda x: (1.0 - p) - sf(spec, x)
    return optimize.brentq(fn, lo, hi, xtol=1e-13 * spec.omega, rtol=4 * np.finfo(float).eps, maxiter=500)


def _quantile_array(spec: DistSpec, p: np.ndarray) -> np.ndarray:
    # tabulate, interpolate, then polish with bracketed Newton steps
    lo = _quantile_scalar(spec, float(p.min()))
    hi = _quantile_scalar(spec, float(p.max()))
    if hi <= lo:
        return np.full_like(p, lo)
    pad = 1e-9 * (hi - lo)
    grid = np.linspace(lo - pad, hi + pad, 129)
    Fg = cdf(spec, grid)
    idx = np.clip(np.searchsorted(Fg, p) - 1, 0, len(grid) - 2)
    a, b = grid[idx].copy(), grid[idx + 1].copy()
    fa, fb = Fg[idx], Fg[idx + 1]
    w = np.where(fb > fa, (p - fa) / np.where(fb > fa, fb - fa, 1.0), 0.5)
    x = a + np.clip(w, 0.0, 1.0) * (b - a)
    active = np.ones(p.shape, dtype=bool)
    for _ in range(60):
        idx_act = np.flatnonzero(active)
        xa, pa = x[idx_act], p[idx_act]
        low = pa <= 0.5
        resid = np.empty_like(xa)
        if low.any():
            resid[low] = np.atleast_1d(cdf(spec, xa[low])) - pa[low]
        if (~low).any():
            resid[~low] = (1.0 - pa[~low]) - np.atleast_1d(sf(spec, xa[~low]))
        tol = 1e-12 * np.minimum(pa, 1.0 - pa)
        converged = np.abs(resid) <= tol
        aa = np.where(resid < 0, xa, a[idx_act])
        bb = np.where(resid > 0, xa, b[idx_act])
        dens = np.atleast_1d(pdf(spec, xa))
        with np.errstate(divide="ignore", invalid="ignore"):
            xn = xa - resid / dens
        bad = ~np.isfinite(xn) | (xn < aa) | (xn > bb)
        xn = np.where(bad, 0.5 * (aa + bb), xn)
        xn = np.where(converged, xa, xn)
        a[idx_act], b[idx_act], x[idx_act] = aa, bb, xn
        done = converged | (np.abs(xn - xa) <= 1e-14 * (spec.omega + np.abs(xa)))
        active[idx_act[done]] = False
        if not active.any():
            break
    return x


def quantile(spec: DistSpec, p):
    """Inverse cdf; ``p`` must lie strictly inside (0, 1)."""
    p_arr = np.asarray(p, dtype=float)
    if np.any(~np.isfinite(p_arr)) or np.any(p_arr <= 0.0) or np.any(p_arr >= 1.0):
        raise ValueError("quantile requires 0 < p < 1")
    if p_arr.ndim == 0:
        return float(_quantile_scalar(spec, float(p_arr)))
    flat = p_arr.ravel()
    return _quantile_array(spec, flat).reshape(p_arr.shape)


def sample(spec: DistSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` i.i.d. values through the stochastic representation."""
    if n < 1:
        raise ValueError("n must be >= 1")
    d = spec.delta
    u0 = rng.standard_normal(n)
    u1 = rng.standard_normal(n)
    w = d * np.abs(u0) + math.sqrt(1.0 - d * d) * u1
    if spec.family is Family.ST:
        v = rng.chisquare(spec.nu, n)
        w = w / np.sqrt(v / spec.nu)
    return spec.xi + spec.omega * w


def mean(spec: DistSpec) -> float:
    b = math.sqrt(2.0 / math.pi)
    if spec.family is Family.SN:
        return spec.xi + spec.omega * spec.delta * b
    nu = spec.nu
    bnu = math.sqrt(nu / math.pi) * math.exp(special.gammaln(0.5 * (nu - 1)) - special.gammaln(0.5 * nu))
    return spec.xi + spec.omega * spec.delta * bnu
