import math

import numpy as np
import pytest
from scipy import integrate

from smsnroc import cutoff as C
from smsnroc import fitting as F
from smsnroc import inference as I
from smsnroc import numdiff
from smsnroc.cutoff import DecisionConfig
from smsnroc.distributions import DistSpec, from_unconstrained, pdf, to_unconstrained

VAR_TH_1000 = {"SN1": 0.8150, "SN2": 0.8390, "SN3": 1.7475, "ST1": 1.1624, "ST2": 1.2629, "ST3": 1.9576}


def theta_of(s):
    return (s.spec0, s.spec1)


def test_z_quantile():
    assert I.z_quantile(0.05) == 1.95996398454005
    assert I.z_quantile(0.10) == pytest.approx(1.6448536269514722, rel=1e-12)
    with pytest.raises(ValueError):
        I.z_quantile(0.0)


def test_wald_ci_zero_se():
    assert I.wald_ci(1.3, 0.0) == (1.3, 1.3)


def test_gaussian_xi_gradient():
    theta = (DistSpec.sn(0.2, 1.3, 0.0), DistSpec.sn(2.0, 1.0, 0.0))
    cfg = DecisionConfig(1, 3, 0.8, 0.2)
    c = 1.1
    z = (c - 0.2) / 1.3
    dfdxi = math.exp(-0.5 * z * z) / math.sqrt(2 * math.pi) * z / 1.3**2
    g = I.grad_phi_in_theta(theta, cfg, c)
    assert g[0] == pytest.approx(-cfg.w0 * dfdxi, abs=1e-6)


def test_stacked_sign_structure(scenarios):
    s = scenarios["SN2"]
    theta, cfg, c = theta_of(s), s.cfg, 1.76
    g = I.grad_phi_in_theta(theta, cfg, c)
    for k, sign, w in ((0, -1, cfg.w0), (1, 1, cfg.w1)):
        spec = theta[k]
        ref = numdiff.gradient(lambda v: pdf(from_unconstrained(spec.family, v), c), to_unconstrained(spec))
        part = g[:3] if k == 0 else g[3:]
        assert np.allclose(part, sign * w * ref, atol=1e-12)


def test_gradient_against_plain_differences(scenarios):
    s = scenarios["ST2"]
    theta, cfg, c = theta_of(s), s.cfg, 1.78
    g = I.grad_phi_in_theta(theta, cfg, c)
    v = np.concatenate([to_unconstrained(theta[0]), to_unconstrained(theta[1])])

    def phi_v(v):
        th = (from_unconstrained("st", v[:4]), from_unconstrained("st", v[4:]))
        return C.phi(th, cfg, c)

    h = 1e-5
    fd = np.array([(phi_v(v + h * e) - phi_v(v - h * e)) / (2 * h) for e in np.eye(8)])
    assert np.allclose(g, fd, atol=1e-5)


def test_asymptotic_variance_blocks():
    grad = np.array([1.0, 2.0, 0.5, -1.0])
    sigma = np.diag([1.0, 2.0, 3.0, 4.0])
    v, t0, t1 = I.asymptotic_variance(grad, sigma, 2.0, 2)
    assert t0 == pytest.approx((1 + 8) / 4)
    assert t1 == pytest.approx((0.75 + 4) / 4)
    assert v == pytest.approx(t0 + t1)
    with pytest.raises(I.IdentifiabilityError):
        I.asymptotic_variance(grad, sigma, 0.0, 2)


@pytest.mark.parametrize("name", list(VAR_TH_1000))
def test_population_variance_near_table(scenarios, name):
    s = scenarios[name]
    v = I.population_variance(theta_of(s), s.cfg)
    assert abs(v / VAR_TH_1000[name] - 1) <= 0.10


def test_expected_information_against_quadrature(scenarios):
    spec = scenarios["ST3"].spec1
    th = to_unconstrained(spec)

    def score(x):
        return numdiff.gradient(lambda t: F.loglik_terms(spec.family, t, np.array([x])), th)[:, 0]

    ref = np.empty((4, 4))
    for i in range(4):
        for j in range(i, 4):
            ref[i, j] = ref[j, i] = integrate.quad(lambda x: score(x)[i] * score(x)[j] * pdf(spec, x),
                                                   -np.inf, np.inf, limit=200)[0]
    assert np.allclose(F.expected_information(spec), ref, atol=1e-8)


def test_plugin_at_truth_matches_population(scenarios):
    s = scenarios["SN1"]
    theta = theta_of(s)
    n = 1000
    fits = []
    for spec in theta:
        info = F.expected_information(spec) * (n // 2)
        fits.append(F.GroupFit(spec, 0.0, 0.0, info, n // 2, True, 0))
    sigma = F.joint_covariance(*fits)
    c = C.optimal_cutoff(theta, s.cfg, C.admissible_interval(theta, s.cfg)).c_star
    inf = I.variance_plugin(theta, s.cfg, c, sigma)
    assert inf.v_hat == pytest.approx(I.population_variance(theta, s.cfg), rel=1e-8)
    assert inf.se == pytest.approx(math.sqrt(inf.v_hat / n))
    assert inf.ci_hi - inf.ci_lo == pytest.approx(2 * I.Z_975 * inf.se)
    assert inf.v_hat == pytest.approx(sum(inf.group_terms))


def test_flat_slope_flagged(scenarios, monkeypatch):
    s = scenarios["SN1"]
    theta = theta_of(s)
    fits = [F.GroupFit(sp, 0.0, 0.0, F.expected_information(sp) * 200, 200, True, 0) for sp in theta]
    monkeypatch.setattr(I, "dphi_dc", lambda *a: 5e-4)
    with pytest.warns(RuntimeWarning):
        inf = I.variance_plugin(theta, s.cfg, 1.61, F.joint_covariance(*fits))
    assert inf.low_identifiability


@pytest.mark.parametrize("name", ["SN2", "ST1"])
def test_implicit_gradient_quadratic_decay(scenarios, name):
    s = scenarios[name]
    theta, cfg = theta_of(s), s.cfg
    fam = theta[0].family
    v0 = np.concatenate([to_unconstrained(theta[0]), to_unconstrained(theta[1])])
    p = len(v0) // 2

    def cstar(v):
        th = (from_unconstrained(fam, v[:p]), from_unconstrained(fam, v[p:]))
        return C.optimal_cutoff(th, cfg, C.admissible_interval(th, cfg)).c_star

    c0 = cstar(v0)
    grad = I.cutoff_gradient(theta, cfg, c0)
    d = np.random.default_rng(0).normal(size=v0.size)
    d /= np.linalg.norm(d)
    errs = [abs(cstar(v0 + e * d) - c0 - e * grad @ d) for e in (1e-1, 1e-2, 1e-3)]
    rates = np.log10(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all((rates > 1.7) & (rates < 2.3))
