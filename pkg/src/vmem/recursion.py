"""Conditional-mean filter, companion-form stationarity, forecasting and simulation.

The conditional mean is

    mu_t = omega + sum_l [alpha_l x_{t-l} + gamma_l x^-_{t-l} + beta_l mu_{t-l}]

with x^-_t = x_t * I_t.  Pre-sample x and mu are set to the sample mean and
x^- to half of it (E(I) = 1/2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from . import copulas, marginals
from .types import CopulaParams, FullParams, MarginalParams, MeanParams, ModelSpec, Panel

BURN_IN = 500


class FilterError(ValueError):
    """Raised when the conditional mean is not strictly positive."""

    def __init__(self, t, i, value):
        super().__init__(f"mu[{t},{i}] = {value:.6g} is not positive")
        self.t, self.i, self.value = t, i, value


class NonStationaryError(ValueError):
    pass


@dataclass(frozen=True)
class ImpactMatrices:
    A: np.ndarray            # (L, K, K)
    A_star: np.ndarray       # (KL, KL) companion
    spectral_radius: float


@dataclass(frozen=True)
class FilterOutput:
    mu: np.ndarray
    eps: np.ndarray
    u: np.ndarray
    x_pre: np.ndarray        # (L, K) pre-sample x, oldest first
    xneg_pre: np.ndarray
    mu_pre: np.ndarray


def companion(A) -> np.ndarray:
    A = np.asarray(A, float)
    L, K, _ = A.shape
    out = np.zeros((K * L, K * L))
    out[:K] = np.concatenate(list(A), axis=1)
    out[K:, : K * (L - 1)] = np.eye(K * (L - 1))
    return out


def impact(theta: MeanParams) -> ImpactMatrices:
    A = theta.impact()
    star = companion(A)
    return ImpactMatrices(A, star, float(np.abs(np.linalg.eigvals(star)).max()))


def unconditional_mean(theta: MeanParams) -> np.ndarray:
    """[I - sum_l A_l]^{-1} omega; raises NonStationaryError unless the companion radius is < 1."""
    rad = impact(theta).spectral_radius
    if not rad < 1:
        raise NonStationaryError(f"spectral radius {rad:.6g} >= 1")
    return np.linalg.solve(theta.persistence(), theta.omega)


# ---------------------------------------------------------------------------
# filter


@numba.njit(cache=True)
def _beta_recursion(c, beta, mu_pre):
    T, K = c.shape
    L = beta.shape[0]
    mu = np.empty((T, K))
    for t in range(T):
        for i in range(K):
            s = c[t, i]
            for l in range(L):
                if t - l - 1 >= 0:
                    prev = mu[t - l - 1]
                else:
                    prev = mu_pre[L + t - l - 1]
                for j in range(K):
                    s += beta[l, i, j] * prev[j]
            mu[t, i] = s
    return mu


def _padded(x, pre):
    return np.concatenate([pre, x], axis=0)


def presample(panel: Panel, L: int, init=None):
    """Pre-sample (x, x^-, mu) blocks of L rows, oldest first."""
    level = panel.mean() if init is None else np.broadcast_to(np.asarray(init, float), (panel.K,))
    x = np.tile(level, (L, 1))
    return x, 0.5 * x, x.copy()


def conditional_mean(panel: Panel, theta: MeanParams, init=None, check=True):
    """mu_t for every row; also returns the pre-sample blocks."""
    L = theta.L
    x_pre, xn_pre, mu_pre = presample(panel, L, init)
    X = _padded(panel.values, x_pre)
    XN = _padded(panel.neg, xn_pre)
    T = panel.T
    c = np.broadcast_to(theta.omega, (T, theta.K)).copy()
    for l in range(L):
        sl = slice(L - l - 1, L - l - 1 + T)
        if np.any(theta.alpha[l]):
            c += X[sl] @ theta.alpha[l].T
        if np.any(theta.gamma[l]):
            c += XN[sl] @ theta.gamma[l].T
    if np.any(theta.beta):
        mu = _beta_recursion(c, np.ascontiguousarray(theta.beta), mu_pre)
    else:
        mu = c
    if check:
        bad = ~(mu > 0)
        if bad.any():
            t, i = np.argwhere(bad)[0]
            raise FilterError(int(t), int(i), float(mu[t, i]))
    return mu, x_pre, xn_pre, mu_pre


def filter(panel: Panel, theta: MeanParams, phi: MarginalParams = None, spec: ModelSpec = None,
           init=None) -> FilterOutput:
    """Run the conditional-mean recursion and form residuals and PITs."""
    mu, x_pre, xn_pre, mu_pre = conditional_mean(panel, theta, init)
    eps = panel.values / mu
    if phi is not None:
        u = marginals.cdf(eps, phi.phi)
    else:
        u = np.full_like(eps, np.nan)
    return FilterOutput(mu, eps, u, x_pre, xn_pre, mu_pre)


# ---------------------------------------------------------------------------
# forecasting


@dataclass(frozen=True)
class ForecastState:
    """Last L observed x, x^- and mu, oldest first, each (L, K)."""

    x: np.ndarray
    xneg: np.ndarray
    mu: np.ndarray

    @classmethod
    def from_filter(cls, panel: Panel, out: FilterOutput, L: int) -> "ForecastState":
        X = _padded(panel.values, out.x_pre)[-L:]
        XN = _padded(panel.neg, out.xneg_pre)[-L:]
        MU = _padded(out.mu, out.mu_pre)[-L:]
        return cls(X, XN, MU)


def forecast(theta: MeanParams, state: ForecastState, horizon: int) -> np.ndarray:
    """h-step conditional mean forecasts, shape (h, K).

    Step one uses observed lags; beyond it the unobserved x is replaced by its
    forecast and x^- by half of it.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    L, K = theta.L, theta.K
    x = list(np.asarray(state.x, float))
    xn = list(np.asarray(state.xneg, float))
    mu = list(np.asarray(state.mu, float))
    out = np.empty((horizon, K))
    for h in range(horizon):
        m = theta.omega.copy()
        for l in range(L):
            m += theta.alpha[l] @ x[-1 - l] + theta.gamma[l] @ xn[-1 - l] + theta.beta[l] @ mu[-1 - l]
        out[h] = m
        x.append(m)
        xn.append(0.5 * m)
        mu.append(m)
    return out


# ---------------------------------------------------------------------------
# simulation


@numba.njit(cache=True)
def _simulate_paths(omega, alpha, gamma, beta, eps, ind, start):
    # eps: (P, T, K), ind: (P, T); start: (K,) used for every pre-sample slot
    P, T, K = eps.shape
    L = alpha.shape[0]
    x = np.empty((P, T, K))
    mu = np.empty((P, T, K))
    for p in range(P):
        for t in range(T):
            for i in range(K):
                s = omega[i]
                for l in range(L):
                    tl = t - l - 1
                    for j in range(K):
                        if tl >= 0:
                            xv = x[p, tl, j]
                            xn = xv * ind[p, tl]
                            mv = mu[p, tl, j]
                        else:
                            xv = start[j]
                            xn = 0.5 * start[j]
                            mv = start[j]
                        s += alpha[l, i, j] * xv + gamma[l, i, j] * xn + beta[l, i, j] * mv
                mu[p, t, i] = s
            for i in range(K):
                x[p, t, i] = mu[p, t, i] * eps[p, t, i]
    return x, mu


def draw_eps(lam_copula: CopulaParams, phi, family: str, n: int, rng):
    phi = np.atleast_1d(np.asarray(phi, float))
    u = copulas.sample(lam_copula, family, n, rng, K=phi.size)
    u = np.clip(u, 1e-300, None)
    return marginals.quantile(u, phi)


def simulate_paths(full: FullParams, spec: ModelSpec, T: int, n_paths: int, rng_seed, burn_in: int = BURN_IN,
                   return_mu: bool = False):
    """Simulate independent paths; returns x (P, T, K), indicators (P, T) and optionally mu."""
    rng = np.random.default_rng(rng_seed)
    theta = full.theta
    K = theta.K
    n = T + burn_in
    eps = draw_eps(full.copula, full.marginal.phi, spec.copula, n_paths * n, rng).reshape(n_paths, n, K)
    ind = rng.integers(0, 2, size=(n_paths, n)).astype(float)
    start = unconditional_mean(theta)
    x, mu = _simulate_paths(theta.omega, np.ascontiguousarray(theta.alpha), np.ascontiguousarray(theta.gamma),
                            np.ascontiguousarray(theta.beta), eps, ind, start)
    out = (x[:, burn_in:], ind[:, burn_in:])
    if return_mu:
        out = out + (mu[:, burn_in:], eps[:, burn_in:])
    return out


def simulate(full: FullParams, spec: ModelSpec, T: int, rng_seed, burn_in: int = BURN_IN,
             labels=None, return_truth: bool = False):
    """Simulate one panel of length T (after discarding ``burn_in`` draws).

    With ``return_truth`` the true (mu, eps) paths are returned alongside the panel.
    """
    x, ind, mu, eps = simulate_paths(full, spec, T, 1, rng_seed, burn_in, return_mu=True)
    panel = Panel(x[0], ind[0].astype(int), tuple(labels) if labels else ())
    if return_truth:
        return panel, mu[0], eps[0]
    return panel
