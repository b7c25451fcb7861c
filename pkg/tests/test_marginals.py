import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special

from vmem import marginals
from vmem.marginals import MarginalDomainError


def test_exponential_special_case():
    assert marginals.pdf(1.0, 1.0) == pytest.approx(np.exp(-1), rel=1e-14)
    assert marginals.cdf(1.0, 1.0) == pytest.approx(1 - np.exp(-1), rel=1e-14)


def test_boundaries():
    assert marginals.cdf(0.0, 3.0) == 0.0
    assert marginals.quantile(1e-300, 3.0) < 1e-90
    assert marginals.quantile(0.0, 3.0) == 0.0


@pytest.mark.parametrize("phi", [0.5, 1.0, 5.0, 20.0])
def test_quantile_inverts_cdf(phi):
    x = np.geomspace(1e-6, 50, 200)
    u = marginals.cdf(x, phi)
    ok = (u > 0) & (u < 1)
    # rounding u costs up to one ulp of u, i.e. ~ulp(u) / f(x) in x; in the upper tail this dominates
    tol = 1e-10 * x[ok] + 2 * np.spacing(u[ok]) / marginals.pdf(x[ok], phi)
    assert np.all(np.abs(marginals.quantile(u[ok], phi) - x[ok]) <= tol)
    lower = ok & (u < 0.5)
    np.testing.assert_allclose(marginals.quantile(u[lower], phi), x[lower], rtol=1e-10)


@pytest.mark.parametrize("phi", [0.5, 1.0, 5.0, 20.0])
def test_density_integrates_to_one(phi):
    val, _ = integrate.quad(lambda e: marginals.pdf(e, phi), 0, np.inf, epsabs=1e-12, epsrel=1e-12, limit=200)
    assert val == pytest.approx(1.0, abs=1e-8)


def test_domain_errors():
    with pytest.raises(MarginalDomainError):
        marginals.logpdf(-1.0, 2.0)
    with pytest.raises(MarginalDomainError):
        marginals.quantile(1.5, 2.0)
    with pytest.raises(MarginalDomainError):
        marginals.cdf(1.0, 0.0)
    with pytest.raises(MarginalDomainError):
        marginals.dlogpdf_dphi(0.0, 2.0)


def test_phi_score_at_unit_point_is_euler_gamma():
    assert marginals.dlogpdf_dphi(1.0, 1.0) == pytest.approx(np.euler_gamma, rel=1e-14)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.05, 10.0), st.floats(0.3, 50.0))
def test_phi_score_matches_fd(eps, phi):
    h = 1e-5 * phi
    fd = (marginals.logpdf(eps, phi + h) - marginals.logpdf(eps, phi - h)) / (2 * h)
    assert marginals.dlogpdf_dphi(eps, phi) == pytest.approx(fd, abs=1e-7 * max(1, abs(fd)))


def test_phi_score_has_zero_mean(rng):
    phi, n = 7.0, 200_000
    s = marginals.dlogpdf_dphi(rng.gamma(phi, 1 / phi, n), phi)
    assert abs(s.mean()) < 3 * s.std() / np.sqrt(n)


def test_cdf_phi_derivative_sign_and_limit():
    # the median of Gamma(phi, phi) is below 1 and climbs toward it, so F(1) falls toward 1/2
    assert marginals.dF_dphi(1.0, 1.0) < 0
    assert marginals.cdf(1.0, 1.0) > marginals.cdf(1.0, 10.0) > 0.5
    assert marginals.dF_dphi(1e-12, 5.0) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("eps,phi", [(0.5, 2.0), (1.0, 1.0), (1.3, 15.0), (0.8, 40.0)])
def test_cdf_phi_derivative_matches_quadrature(eps, phi):
    # d/dphi of the integral of the density equals the integral of pdf * dlogpdf/dphi
    f = lambda s: marginals.pdf(s, phi) * marginals.dlogpdf_dphi(s, phi)
    ref, _ = integrate.quad(f, 0, eps, epsabs=1e-13, epsrel=1e-12, limit=200)
    assert marginals.dF_dphi(eps, phi) == pytest.approx(ref, abs=1e-6)


def test_eps_score_term_examples():
    assert marginals.eps_score_term(1.0, 2.0) == 0.0
    assert marginals.eps_score_term(0.8, 5.0) == pytest.approx(1.0)


def test_eps_score_term_matches_logpdf_derivative():
    eps, phi, h = 0.7, 3.0, 1e-6
    dlog = (marginals.logpdf(eps + h, phi) - marginals.logpdf(eps - h, phi)) / (2 * h)
    assert marginals.eps_score_term(eps, phi) == pytest.approx(eps * dlog + 1, rel=1e-8)


def test_eps_score_term_zero_mean(rng):
    phi, n = 4.0, 200_000
    s = marginals.eps_score_term(rng.gamma(phi, 1 / phi, n), phi)
    assert abs(s.mean()) < 3 * s.std() / np.sqrt(n)


def test_moment_estimator():
    assert marginals.phi_moment_estimator(np.array([0.5, 1.5])) == pytest.approx(4.0)
    with pytest.raises(ValueError):
        marginals.phi_moment_estimator(np.ones(5))


def test_moment_estimator_consistency(rng):
    n = 100_000
    e = rng.gamma(20, 1 / 20, n)
    # delta-method SE of 1/var for Gamma(phi, phi): var of (e-1)^2 is (mu4 - sigma^4)
    sigma2 = 1 / 20
    mu4 = 3 * sigma2 ** 2 + 6 / 20 ** 3
    se = np.sqrt((mu4 - sigma2 ** 2) / n) / sigma2 ** 2
    assert abs(marginals.phi_moment_estimator(e) - 20) < 3 * se


def test_unit_mean_and_variance(rng):
    phi, n = 3.0, 200_000
    e = marginals.quantile(rng.uniform(size=n), phi)
    assert abs(e.mean() - 1) < 3 * np.sqrt(1 / phi / n)
    assert abs(e.var() - 1 / phi) < 3 * np.sqrt((special.gamma(phi + 4) / special.gamma(phi) / phi ** 4 - 1) / n)
