"""Elliptical copulas (Normal, Student-T) and the independence copula.

The correlation matrix is parameterized without constraints as R = D c'c D,
with c unit upper-triangular and D the diagonal that rescales the columns
of C = cD to unit length.  Every function takes the PIT panel ``u`` as a
(T, K) array (a single K-vector is treated as T = 1).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg, special, stats

from .types import CopulaParams

U_CLAMP = 1e-12
MIN_EIG = 1e-10


class SingularCorrelationError(ValueError):
    pass


def _dim_from_free(m: int) -> int:
    K = int(round((1 + np.sqrt(1 + 8 * m)) / 2))
    if K * (K - 1) // 2 != m:
        raise ValueError(f"{m} is not a valid number of free correlation parameters")
    return K


def build_R(c_free):
    """Map free elements of c to (c, D, C, R)."""
    c_free = np.atleast_1d(np.asarray(c_free, float))
    K = _dim_from_free(c_free.size)
    c = np.eye(K)
    c[np.triu_indices(K, 1)] = c_free
    D = 1.0 / np.sqrt((c ** 2).sum(axis=0))
    C = c * D
    R = C.T @ C
    # exact unit diagonal; the construction already gives it up to rounding
    R[np.diag_indices(K)] = 1.0
    return c, D, C, R


def c_from_R(R) -> np.ndarray:
    """Inverse of build_R: free elements of c for a correlation matrix R."""
    U = linalg.cholesky(np.asarray(R, float), lower=False)
    c = U / np.diag(U)
    return c[np.triu_indices(U.shape[0], 1)]


def clamp_u(u):
    u = np.asarray(u, float)
    bad = (u < U_CLAMP) | (u > 1 - U_CLAMP)
    n = int(bad.sum())
    if n:
        warnings.warn(f"{n} PIT value(s) clamped to [{U_CLAMP}, 1-{U_CLAMP}]", RuntimeWarning, stacklevel=3)
        u = np.clip(u, U_CLAMP, 1 - U_CLAMP)
    return u, n


# ---------------------------------------------------------------------------
# elliptical generators


class NormalGenerator:
    name = "normal"
    nu = None

    def log_kstar(self, K):
        return 0.0

    def log_g1(self, x, K):
        return -0.5 * x

    def dlog_g1(self, x, K):
        return np.full_like(np.asarray(x, float), -0.5)

    def log_g2(self, x):
        return -0.5 * x

    def dlog_g2(self, x):
        return np.full_like(np.asarray(x, float), -0.5)

    def ppf(self, u):
        return special.ndtri(u)

    def cdf(self, q):
        return special.ndtr(q)

    def logpdf(self, q):
        return -0.5 * q * q - 0.5 * np.log(2 * np.pi)


class StudentTGenerator:
    name = "student_t"

    def __init__(self, nu):
        self.nu = float(nu)

    def log_kstar(self, K):
        nu = self.nu
        return (special.gammaln((nu + K) / 2) + (K - 1) * special.gammaln(nu / 2)
                - K * special.gammaln((nu + 1) / 2))

    def dlog_kstar(self, K):
        nu = self.nu
        return 0.5 * (special.digamma((nu + K) / 2) + (K - 1) * special.digamma(nu / 2)
                      - K * special.digamma((nu + 1) / 2))

    def log_g1(self, x, K):
        return -0.5 * (self.nu + K) * np.log1p(x / self.nu)

    def dlog_g1(self, x, K):
        return -0.5 * (self.nu + K) / (self.nu + x)

    def log_g2(self, x):
        return -0.5 * (self.nu + 1) * np.log1p(x / self.nu)

    def dlog_g2(self, x):
        return -0.5 * (self.nu + 1) / (self.nu + x)

    def ppf(self, u):
        return t_quantile(self.nu, u)

    def cdf(self, q):
        return special.stdtr(self.nu, q)

    def logpdf(self, q):
        nu = self.nu
        return (special.gammaln((nu + 1) / 2) - special.gammaln(nu / 2) - 0.5 * np.log(nu * np.pi)
                - 0.5 * (nu + 1) * np.log1p(q * q / nu))

    def dnu_log_g1(self, x, K):
        nu = self.nu
        return -0.5 * np.log1p(x / nu) + 0.5 * (nu + K) * x / (nu * (nu + x))


def t_quantile(nu, u):
    """Student-t quantile through the inverse regularized incomplete beta.

    Near the centre the two-sided form I_y(1/2, nu/2) = |2u - 1| with
    y = q^2 / (nu + q^2) avoids cancellation; in the tails the one-sided form
    I_x(nu/2, 1/2) = 2 min(u, 1 - u) with x = nu / (nu + q^2) is used.
    Several times faster than ``scipy.special.stdtrit``.
    """
    u = np.asarray(u, float)
    two = np.abs(2 * u - 1)
    centre = two < 0.5
    out = np.empty_like(u)
    y = special.betaincinv(0.5, nu / 2, two[centre])
    out[centre] = np.sqrt(nu * y / (1 - y))
    x = special.betaincinv(nu / 2, 0.5, 2 * np.minimum(u, 1 - u)[~centre])
    with np.errstate(divide="ignore"):
        out[~centre] = np.sqrt(nu * (1 / x - 1))
    return np.where(u < 0.5, -out, out)


def generator(family: str, nu=None):
    if family == "normal":
        return NormalGenerator()
    if family == "student_t":
        if nu is None:
            raise ValueError("Student-T copula needs nu")
        return StudentTGenerator(nu)
    raise ValueError(f"no elliptical generator for {family!r}")


# ---------------------------------------------------------------------------
# per-observation work


@dataclass
class EllipticalWork:
    q: np.ndarray          # (T, K) G^{-1}(u)
    q_tilde: np.ndarray    # (T, K) C'^{-1} q
    q_star: np.ndarray     # (T, K) R^{-1} q
    qq: np.ndarray         # (T,)  q' R^{-1} q
    c: np.ndarray
    D: np.ndarray
    C: np.ndarray
    R: np.ndarray
    gen: object


def elliptical_work(u, xi: CopulaParams, family: str, q=None) -> EllipticalWork:
    u = np.atleast_2d(u)
    K = u.shape[1]
    gen = generator(family, xi.nu)
    if K > 1:
        c, D, C, R = build_R(xi.c_free)
    else:
        c, D, C, R = np.eye(1), np.ones(1), np.eye(1), np.eye(1)
    if np.linalg.eigvalsh(R).min() < MIN_EIG:
        raise SingularCorrelationError("copula correlation matrix is numerically singular")
    if q is None:
        q = gen.ppf(u)
    q_star = linalg.cho_solve(linalg.cho_factor(R), q.T).T
    q_tilde = linalg.solve_triangular(C, q.T, trans="T", lower=False).T
    qq = np.einsum("tk,tk->t", q, q_star)
    return EllipticalWork(q, q_tilde, q_star, qq, c, D, C, R, gen)


def _logc_from_work(w: EllipticalWork):
    K = w.q.shape[1]
    g = w.gen
    return (g.log_kstar(K) - np.log(w.D[1:]).sum() + g.log_g1(w.qq, K)
            - g.log_g2(w.q ** 2).sum(axis=1))


def _grad_u_from_work(w: EllipticalWork):
    K = w.q.shape[1]
    g = w.gen
    dq = 2 * w.q_star * g.dlog_g1(w.qq, K)[:, None] - 2 * w.q * g.dlog_g2(w.q ** 2)
    return dq / np.exp(g.logpdf(w.q))


def _score_c_per_t(w: EllipticalWork):
    K = w.q.shape[1]
    dg1 = w.gen.dlog_g1(w.qq, K)
    iu, ju = np.triu_indices(K, 1)
    D, C = w.D, w.C
    out = D[ju] * C[iu, ju] + 2 * D[ju] * w.q_star[:, ju] * (C[iu, ju] * w.q[:, ju] - w.q_tilde[:, iu]) * dg1[:, None]
    return out


def _score_nu_per_t(u, xi: CopulaParams, rel_step=1e-4, w: EllipticalWork = None):
    """d log c / d nu per t.

    Everything is analytic except dq/dnu = -(dG/dnu)(q) / g(q), where the nu
    derivative of the t cdf at fixed q is a central difference with step rel_step * nu.
    """
    if w is None:
        w = elliptical_work(u, xi, "student_t")
    gen = w.gen
    nu = gen.nu
    K = w.q.shape[1]
    q2 = w.q ** 2
    h = rel_step * nu
    dG = (special.stdtr(nu + h, w.q) - special.stdtr(nu - h, w.q)) / (2 * h)
    dq = -dG / np.exp(gen.logpdf(w.q))
    grad_q = 2 * w.q_star * gen.dlog_g1(w.qq, K)[:, None] - 2 * w.q * gen.dlog_g2(q2)
    explicit = gen.dnu_log_g1(w.qq, K) - gen.dnu_log_g1(q2, 1).sum(axis=1)
    return gen.dlog_kstar(K) + explicit + (grad_q * dq).sum(axis=1)


# ---------------------------------------------------------------------------
# public operations


def copula_logdensity(u, xi: CopulaParams, family: str):
    """log c(u_t) for every row of u; returns shape (T,) (scalar for a single u)."""
    single = np.ndim(u) == 1
    u = np.atleast_2d(u)
    if family == "independent" or u.shape[1] == 1:
        out = np.zeros(u.shape[0])
    else:
        u, _ = clamp_u(u)
        out = _logc_from_work(elliptical_work(u, xi, family))
    return out[0] if single else out


def grad_u_logc(u, xi: CopulaParams, family: str):
    """d_{t,i} = d log c(u_t) / d u_{t,i}."""
    single = np.ndim(u) == 1
    u = np.atleast_2d(u)
    if family == "independent" or u.shape[1] == 1:
        out = np.zeros_like(u, dtype=float)
    else:
        u, _ = clamp_u(u)
        out = _grad_u_from_work(elliptical_work(u, xi, family))
    return out[0] if single else out


def score_c(u, xi: CopulaParams, family: str, per_t: bool = False):
    """Gradient of sum_t log c(u_t) over the free elements of c."""
    u, _ = clamp_u(np.atleast_2d(u))
    s = _score_c_per_t(elliptical_work(u, xi, family))
    return s if per_t else s.sum(axis=0)


def score_nu(u, xi: CopulaParams, per_t: bool = False):
    """d/d nu of sum_t log c(u_t) for the Student-T copula.

    The normalizing-constant part is analytic; the generator and quantile part is a
    central difference with step 1e-4 * nu.
    """
    u, _ = clamp_u(np.atleast_2d(u))
    s = _score_nu_per_t(u, xi)
    return s if per_t else s.sum()


def sample(xi: CopulaParams, family: str, n: int, rng, K: int = None):
    """Draw n vectors u from the copula."""
    rng = np.random.default_rng(rng)
    if K is None:
        K = _dim_from_free(xi.c_free.size) if xi.c_free.size else 1
    if family == "independent":
        return rng.uniform(size=(n, K))
    R = xi.correlation(K)
    z = rng.standard_normal((n, K)) @ np.linalg.cholesky(R).T
    if family == "normal":
        return special.ndtr(z)
    w = np.sqrt(xi.nu / rng.chisquare(xi.nu, size=n))
    return special.stdtr(xi.nu, z * w[:, None])


def nearest_correlation(R, floor=1e-6):
    """Eigenvalue clipping followed by rescaling to unit diagonal."""
    R = 0.5 * (R + R.T)
    vals, vecs = np.linalg.eigh(R)
    if vals.min() >= floor:
        return R
    R = (vecs * np.maximum(vals, floor)) @ vecs.T
    s = 1.0 / np.sqrt(np.diag(R))
    R = R * np.outer(s, s)
    R[np.diag_indices_from(R)] = 1.0
    return R


def kendall_R(eps):
    """Correlation matrix from pairwise Kendall tau, R_ij = sin(pi tau_ij / 2)."""
    eps = np.asarray(eps, float)
    if eps.shape[0] < 2:
        raise ValueError("need at least two observations")
    K = eps.shape[1]
    R = np.eye(K)
    for i in range(K):
        for j in range(i + 1, K):
            tau = stats.kendalltau(eps[:, i], eps[:, j]).statistic
            R[i, j] = R[j, i] = np.sin(0.5 * np.pi * tau)
    return nearest_correlation(R)


def implied_eps_correlation(xi: CopulaParams, family: str, phi, n=200_000, rng=0):
    """Monte Carlo correlation of eps under the copula with Gamma(phi, phi) marginals."""
    from . import marginals

    phi = np.asarray(phi, float)
    u = sample(xi, family, n, rng, K=phi.size)
    eps = marginals.quantile(u, phi)
    return np.corrcoef(eps, rowvar=False)
