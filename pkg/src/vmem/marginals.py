"""Unit-mean Gamma(phi, phi) marginals and the score pieces the likelihood needs."""

import numpy as np
from scipy import special


class MarginalDomainError(ValueError):
    pass


def _check_phi(phi):
    phi = np.asarray(phi, float)
    if np.any(~(phi > 0)):
        raise MarginalDomainError(f"phi must be > 0, got {phi}")
    return phi


def logpdf(eps, phi):
    """log density of Gamma(shape=phi, rate=phi) at eps >= 0."""
    eps = np.asarray(eps, float)
    phi = _check_phi(phi)
    if np.any(eps < 0):
        raise MarginalDomainError("eps must be nonnegative")
    with np.errstate(divide="ignore"):
        return phi * np.log(phi) - special.gammaln(phi) + special.xlogy(phi - 1, eps) - phi * eps


def pdf(eps, phi):
    return np.exp(logpdf(eps, phi))


def cdf(eps, phi):
    eps = np.asarray(eps, float)
    phi = _check_phi(phi)
    if np.any(eps < 0):
        raise MarginalDomainError("eps must be nonnegative")
    return special.gammainc(phi, phi * eps)


def quantile(u, phi):
    u = np.asarray(u, float)
    phi = _check_phi(phi)
    if np.any((u < 0) | (u > 1)):
        raise MarginalDomainError("u must lie in [0, 1]")
    return special.gammaincinv(phi, u) / phi


def dlogpdf_dphi(eps, phi):
    """d log f / d phi = ln phi - digamma(phi) + ln eps - eps + 1."""
    eps = np.asarray(eps, float)
    phi = _check_phi(phi)
    if np.any(~(eps > 0)):
        raise MarginalDomainError("d log f / d phi is unbounded at eps = 0")
    return np.log(phi) - special.digamma(phi) + np.log(eps) - eps + 1.0


def dF_dphi(eps, phi, rel_step=1e-5):
    """Numerical d F(eps; phi) / d phi.

    Central differences at steps h and h/2 combined by one Richardson level,
    h = rel_step * phi.
    """
    eps = np.asarray(eps, float)
    phi = _check_phi(phi)
    h = rel_step * phi

    def central(s):
        return (special.gammainc(phi + s, (phi + s) * eps) - special.gammainc(phi - s, (phi - s) * eps)) / (2 * s)

    return (4.0 * central(h / 2) - central(h)) / 3.0


def eps_score_term(eps, phi):
    """eps * d log f / d eps + 1, which for Gamma(phi, phi) is phi - eps * phi."""
    return np.asarray(phi, float) * (1.0 - np.asarray(eps, float))


def phi_moment_estimator(eps):
    """phi_hat = 1 / var(eps), variance with divisor T (column-wise for 2-D input)."""
    eps = np.asarray(eps, float)
    if eps.shape[0] < 2:
        raise ValueError("need at least two observations")
    var = eps.var(axis=0)
    if np.any(var <= 0):
        raise ValueError("zero residual variance, phi is not identified")
    return 1.0 / var
