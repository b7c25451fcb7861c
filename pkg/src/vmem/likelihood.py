"""Log-likelihood and analytic score of the copula vMEM.

For each t the chain is mu_t(theta) -> eps_t = x_t / mu_t -> u_t = F(eps_t; phi) -> c(u_t; xi),
and the contribution is log c(u_t) + sum_i log f_i(eps_ti) - sum_i log mu_ti.

Scores are returned in the *natural* parameterization (omega, mean entries,
c_free, nu, phi) in the order used by :func:`vmem.types.pack_params` with
``transform=False``.  Under targeting omega is dropped and the mean entries
absorb its dependence through omega = (I - sum A_l) mu_bar.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numba
import numpy as np
from scipy import special

from . import copulas, marginals
from .copulas import clamp_u
from .recursion import conditional_mean
from .types import NU_FLOOR, CopulaParams, FullParams, MarginalParams, MeanParams, ModelSpec, Panel


@dataclass
class Evaluation:
    loglik: float
    ll_t: np.ndarray
    mu: np.ndarray
    eps: np.ndarray
    u: np.ndarray
    d: np.ndarray
    n_clamped: int
    score: Optional[np.ndarray] = None
    score_t: Optional[np.ndarray] = None
    R_tilde: Optional[np.ndarray] = None
    Q: Optional[np.ndarray] = None


# ---------------------------------------------------------------------------
# d mu_t / d theta


@numba.njit(cache=True)
def _jacobian_recursion(J, beta):
    T, P, K = J.shape
    L = beta.shape[0]
    for t in range(T):
        for l in range(L):
            s = t - l - 1
            if s < 0:
                continue
            for p in range(P):
                for i in range(K):
                    acc = 0.0
                    for j in range(K):
                        acc += beta[l, i, j] * J[s, p, j]
                    J[t, p, i] += acc
    return J


def mean_jacobian(panel: Panel, theta: MeanParams, spec: ModelSpec, mu, x_pre, xn_pre, mu_pre):
    """d mu_t / d (omega, mean entries) as a (T, K + n_entries, K) array.

    Pre-sample derivatives are zero.
    """
    T, K, L = panel.T, spec.K, spec.L
    entries = spec.mean_entries()
    J = np.zeros((T, K + len(entries), K))
    for i in range(K):
        J[:, i, i] = 1.0
    src = {
        "alpha": np.concatenate([x_pre, panel.values]),
        "gamma": np.concatenate([xn_pre, panel.neg]),
        "beta": np.concatenate([mu_pre, mu]),
    }
    for p, (block, l, i, j) in enumerate(entries, start=K):
        J[:, p, i] = src[block][L - l - 1: L - l - 1 + T, j]
    if np.any(theta.beta):
        _jacobian_recursion(J, np.ascontiguousarray(theta.beta))
    return J


def targeting_chain(spec: ModelSpec, mu_bar) -> np.ndarray:
    """d omega / d (mean entries) when omega = (I - sum A_l) mu_bar; shape (n_entries, K)."""
    entries = spec.mean_entries()
    G = np.zeros((len(entries), spec.K))
    weight = {"alpha": 1.0, "beta": 1.0, "gamma": 0.5}
    for p, (block, l, i, j) in enumerate(entries):
        G[p, i] = -weight[block] * mu_bar[j]
    return G


# ---------------------------------------------------------------------------
# copula pieces


def _concentrated_pieces(u):
    """Normal copula with R replaced by the normalized Q = q'q/T."""
    q = special.ndtri(u)
    T, K = q.shape
    Q = q.T @ q / T
    dq = np.diag(Q)
    s = 1.0 / np.sqrt(dq)
    R_t = Q * np.outer(s, s)
    R_t[np.diag_indices(K)] = 1.0
    Rinv = np.linalg.inv(R_t)
    _, logdet = np.linalg.slogdet(R_t)
    logc = -0.5 * logdet - 0.5 * (np.einsum("ti,ij,tj->t", q, Rinv, q) - (q * q).sum(axis=1))
    Qinv = np.linalg.inv(Q)
    Dh = np.diag(np.sqrt(dq))
    Cm = (Qinv @ Dh @ Q @ Dh @ Qinv - Qinv + np.eye(K) - Rinv + np.diag(1.0 / dq)
          - np.diag(s * np.diag(Qinv @ Dh @ Q)))
    d = (q @ Cm.T) / np.exp(-0.5 * q * q - 0.5 * np.log(2 * np.pi))
    return logc, d, R_t, Q


def _copula_pieces(u, xi: CopulaParams, family: str, want_params: bool):
    K = u.shape[1]
    T = u.shape[0]
    if family == "independent" or K == 1:
        return np.zeros(T), np.zeros((T, K)), None, None
    w = copulas.elliptical_work(u, xi, family)
    logc = copulas._logc_from_work(w)
    d = copulas._grad_u_from_work(w)
    sc = snu = None
    if want_params:
        sc = copulas._score_c_per_t(w)
        if family == "student_t":
            snu = copulas._score_nu_per_t(u, xi, w=w)
    return logc, d, sc, snu


# ---------------------------------------------------------------------------
# evaluation


def evaluate(panel: Panel, full: FullParams, spec: ModelSpec, score: bool = False,
             concentrated: bool = False, init=None) -> Evaluation:
    """Log-likelihood and (optionally) per-t scores.

    ``concentrated`` (Normal copula only) replaces R with the normalized
    moment estimator and drops the copula parameters from the score.
    """
    if concentrated and spec.copula != "normal":
        raise ValueError("the concentrated likelihood is defined for the Normal copula")
    theta, phi = full.theta, full.marginal.phi
    mu, x_pre, xn_pre, mu_pre = conditional_mean(panel, theta, init)
    x = panel.values
    eps = x / mu
    logf = marginals.logpdf(eps, phi)
    u, n_clamped = clamp_u(marginals.cdf(eps, phi))

    K = spec.K
    R_t = Q = None
    sc = snu = None
    if concentrated and K > 1:
        logc, d, R_t, Q = _concentrated_pieces(u)
    elif concentrated:
        logc, d = np.zeros(panel.T), np.zeros((panel.T, 1))
        R_t = Q = np.eye(1)
    else:
        logc, d, sc, snu = _copula_pieces(u, full.copula, spec.copula, score)
    ll_t = logc + logf.sum(axis=1) - np.log(mu).sum(axis=1)
    ev = Evaluation(float(ll_t.sum()), ll_t, mu, eps, u, d, n_clamped, R_tilde=R_t, Q=Q)
    if not score:
        return ev

    w = eps * np.exp(logf) * d + marginals.eps_score_term(eps, phi)
    J = mean_jacobian(panel, theta, spec, mu, x_pre, xn_pre, mu_pre)
    s_mean = -np.einsum("tpk,tk->tp", J, w / mu)
    s_omega, s_entries = s_mean[:, :K], s_mean[:, K:]
    parts = []
    if spec.targeting:
        if full.mu_bar is None:
            raise ValueError("targeting requires mu_bar")
        s_entries = s_entries + s_omega @ targeting_chain(spec, full.mu_bar).T
    else:
        parts.append(s_omega)
    parts.append(s_entries)
    if not concentrated and spec.copula != "independent":
        parts.append(sc)
        if spec.copula == "student_t":
            parts.append(snu[:, None])
    s_phi = marginals.dF_dphi(eps, phi) * d + marginals.dlogpdf_dphi(eps, phi)
    parts.append(s_phi)
    ev.score_t = np.concatenate(parts, axis=1)
    ev.score = ev.score_t.sum(axis=0)
    return ev


def natural_to_packed_gradient(grad, full: FullParams, spec: ModelSpec, include_copula: bool = True):
    """Chain rule from natural parameters to the log-transformed packing."""
    g = np.array(grad, float, copy=True)
    K = spec.K
    g[..., -K:] *= full.marginal.phi
    if include_copula and spec.copula == "student_t":
        g[..., -K - 1] *= full.copula.nu - NU_FLOOR
    return g


# ---------------------------------------------------------------------------
# public wrappers


def loglik(panel: Panel, full: FullParams, spec: ModelSpec) -> float:
    return evaluate(panel, full, spec).loglik


def score(panel: Panel, full: FullParams, spec: ModelSpec) -> np.ndarray:
    """Analytic gradient over all free parameters in natural coordinates."""
    return evaluate(panel, full, spec, score=True).score


def _as_full(theta, phi, spec, mu_bar=None):
    phi = phi if isinstance(phi, MarginalParams) else MarginalParams(phi)
    K = spec.K
    return FullParams(theta, CopulaParams(np.zeros(K * (K - 1) // 2)), phi, mu_bar)


def concentrated_loglik_normal(panel: Panel, theta: MeanParams, phi, spec: ModelSpec,
                               constrained: bool = True, mu_bar=None):
    """Normal-copula log-likelihood with R concentrated out.

    Returns (value, R_tilde).  ``constrained=False`` plugs in Q itself, which is
    not a correlation matrix; the value is then T/2 [-ln|Q| - K + tr Q] + marginal terms.
    """
    spec = spec.with_(copula="normal")
    ev = evaluate(panel, _as_full(theta, phi, spec, mu_bar), spec, concentrated=True)
    if constrained:
        return ev.loglik, ev.R_tilde
    T, K = panel.T, spec.K
    q = special.ndtri(ev.u)
    Q = q.T @ q / T
    _, logdet = np.linalg.slogdet(Q)
    phi = phi.phi if isinstance(phi, MarginalParams) else np.asarray(phi, float)
    marginal_part = float(marginals.logpdf(ev.eps, phi).sum() - np.log(ev.mu).sum())
    return 0.5 * T * (-logdet - K + np.trace(Q)) + marginal_part, Q


def concentrated_score_normal(panel: Panel, theta: MeanParams, phi, spec: ModelSpec, mu_bar=None):
    """Gradient of the concentrated log-likelihood over (theta, phi), natural coordinates."""
    spec = spec.with_(copula="normal")
    return evaluate(panel, _as_full(theta, phi, spec, mu_bar), spec, score=True, concentrated=True).score


def cubic_K2_coefficients(q) -> np.ndarray:
    """Coefficients (highest power first) of the K = 2 first-order condition for R_12."""
    q = np.asarray(q, float)
    if q.ndim != 2 or q.shape[1] != 2:
        raise ValueError("cubic check needs a (T, 2) array")
    S = q.T @ q / q.shape[0]
    return np.array([1.0, -S[0, 1], S[0, 0] + S[1, 1] - 1.0, -S[0, 1]])


def cubic_check_K2(q) -> float:
    """Root in (-1, 1) of the first-order condition for R_12 when K = 2.

    R^3 - R^2 s12 + R (s11 + s22 - 1) - s12 = 0 with s = q'q / T.
    """
    coef = cubic_K2_coefficients(q)
    q = np.asarray(q, float)
    S = q.T @ q / q.shape[0]
    roots = np.roots(coef)
    real = roots[np.abs(roots.imag) < 1e-9].real
    inside = real[(real > -1) & (real < 1)]
    if inside.size == 0:
        raise ValueError("no root of the cubic in (-1, 1)")
    # the likelihood-maximizing root is the one closest to the sample correlation
    r0 = S[0, 1] / np.sqrt(S[0, 0] * S[1, 1])
    return float(inside[np.argmin(np.abs(inside - r0))])
