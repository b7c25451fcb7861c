"""Residual portmanteau tests, information criteria, causality Wald tests,
forecast losses and Diebold-Mariano comparisons."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import stats

DEFAULT_LB_LAGS = (12, 22, 32)


# ---------------------------------------------------------------------------
# Ljung-Box


@dataclass(frozen=True)
class PortmanteauResult:
    lags: tuple
    statistics: np.ndarray
    dof: np.ndarray
    pvalues: np.ndarray


def ljung_box_joint(eps, lags=DEFAULT_LB_LAGS) -> PortmanteauResult:
    """Multivariate portmanteau test of no autocorrelation in eps - 1.

    Q(m) = T(T+2) sum_{h=1}^m (T-h)^{-1} tr(C_h' C_0^{-1} C_h C_0^{-1}), chi-square with K^2 m
    degrees of freedom.  With K = 1 this is the usual Ljung-Box statistic.
    """
    e = np.asarray(eps, float)
    if e.ndim == 1:
        e = e[:, None]
    T, K = e.shape
    lags = tuple(int(m) for m in np.atleast_1d(lags))
    if max(lags) >= T:
        raise ValueError(f"T = {T} must exceed the largest lag {max(lags)}")
    z = e - 1.0
    C0 = z.T @ z / T
    if np.linalg.cond(C0) > 1e12:
        raise np.linalg.LinAlgError("lag-0 residual covariance is singular")
    C0inv = np.linalg.inv(C0)
    terms = np.empty(max(lags))
    for h in range(1, max(lags) + 1):
        Ch = z[h:].T @ z[:-h] / T
        terms[h - 1] = np.trace(Ch.T @ C0inv @ Ch @ C0inv) / (T - h)
    cum = T * (T + 2) * np.cumsum(terms)
    Q = np.array([cum[m - 1] for m in lags])
    dof = np.array([K * K * m for m in lags])
    return PortmanteauResult(lags, Q, dof, stats.chi2.sf(Q, dof))


# ---------------------------------------------------------------------------
# information criteria


def information_criteria(loglik: float, n_free: int, T: int) -> tuple[float, float]:
    """(AIC, BIC) = (-2 ll + 2 n, -2 ll + n ln T)."""
    return -2.0 * loglik + 2.0 * n_free, -2.0 * loglik + n_free * math.log(T)


# ---------------------------------------------------------------------------
# causality


@dataclass(frozen=True)
class WaldResult:
    statistic: float
    dof: int
    pvalue: float
    names: tuple


def wald_test(estimates, cov, index) -> tuple[float, int, float]:
    idx = list(index)
    r = np.asarray(estimates, float)[idx]
    V = np.asarray(cov, float)[np.ix_(idx, idx)]
    W = float(r @ np.linalg.solve(V, r))
    return W, len(idx), float(stats.chi2.sf(W, len(idx)))


def causality_wald(fit, source, target, lag: int = 1) -> WaldResult:
    """Wald test that series ``source`` does not enter the equation of ``target``.

    Restricts alpha_lag[target, source] and, when free, beta_lag[target, source].
    Series may be given by label or 0-based index.
    """
    labels = list(fit.labels) if fit.labels else [f"x{i + 1}" for i in range(fit.spec.K)]
    j = labels[source] if isinstance(source, (int, np.integer)) else source
    i = labels[target] if isinstance(target, (int, np.integer)) else target
    if i == j:
        raise ValueError("source and target must differ")
    wanted = [f"alpha{lag}[{i},{j}]", f"beta{lag}[{i},{j}]"]
    sel = [fit.names.index(n) for n in wanted if n in fit.names]
    if not sel or wanted[0] not in fit.names:
        raise KeyError(f"{wanted[0]} is not a free coefficient of this model")
    if fit.cov is None:
        raise ValueError("fit has no covariance matrix")
    W, dof, p = wald_test(fit.estimates, fit.cov, sel)
    return WaldResult(W, dof, p, tuple(fit.names[k] for k in sel))


# ---------------------------------------------------------------------------
# losses and Diebold-Mariano


@dataclass(frozen=True)
class LossSeries:
    e_N: np.ndarray
    e_G: np.ndarray          # as printed: ln(x/mu) - x/mu - 1, best (largest) at x = mu
    horizon: int = 1
    label: str = ""

    @property
    def e_G_loss(self) -> np.ndarray:
        """Negated e_G so that smaller is better, like e_N."""
        return -self.e_G


def losses(x, mu, horizon: int = 1, label: str = "") -> LossSeries:
    """Squared-error and Gamma-type losses; e_G is NaN (with a warning) where x = 0."""
    x = np.asarray(x, float)
    mu = np.asarray(mu, float)
    if np.any(~(mu > 0)):
        raise ValueError("predicted means must be positive")
    if np.any(x < 0):
        raise ValueError("observations must be nonnegative")
    r = x / mu
    eN = 0.5 * (x - mu) ** 2
    zero = r == 0
    if zero.any():
        warnings.warn(f"{int(zero.sum())} zero observation(s): e_G set to missing", RuntimeWarning, stacklevel=2)
    with np.errstate(divide="ignore"):
        eG = np.where(zero, np.nan, np.log(np.where(zero, 1.0, r)) - r - 1.0)
    return LossSeries(eN, eG, horizon, label)


@dataclass(frozen=True)
class DMResult:
    statistic: Optional[float]
    pvalue: Optional[float]
    mean_diff: float
    defined: bool
    n: int

    @property
    def significant(self) -> bool:
        return self.defined and self.pvalue < 0.05


def long_run_variance(d, bandwidth: int) -> float:
    """Bartlett-weighted autocovariance sum (2 pi times the spectral density at zero)."""
    d = np.asarray(d, float)
    z = d - d.mean()
    T = z.size
    v = z @ z / T
    for j in range(1, bandwidth + 1):
        v += 2 * (1 - j / (bandwidth + 1)) * (z[j:] @ z[:-j]) / T
    return float(v)


def diebold_mariano(loss_a, loss_b, horizon: int = 1) -> DMResult:
    """DM test on d_t = loss_a - loss_b; positive means B has the smaller loss.

    Bartlett long-run variance with bandwidth h - 1; two-sided Normal p-value.
    Pairs with a missing loss are dropped.
    """
    a = np.asarray(loss_a, float)
    b = np.asarray(loss_b, float)
    if a.shape != b.shape:
        raise ValueError("loss series must have equal length")
    keep = np.isfinite(a) & np.isfinite(b)
    d = a[keep] - b[keep]
    n = d.size
    if n < 10:
        raise ValueError("Diebold-Mariano needs at least 10 loss pairs")
    dbar = float(d.mean())
    lrv = long_run_variance(d, max(horizon - 1, 0))
    if not lrv > 1e-14 * max(1.0, float(np.mean(a[keep] ** 2))):
        return DMResult(None, None, dbar, False, n)
    stat = dbar / math.sqrt(lrv / n)
    return DMResult(stat, float(2 * stats.norm.sf(abs(stat))), dbar, True, n)
