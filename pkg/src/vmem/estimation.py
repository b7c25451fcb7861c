"""Maximum-likelihood fitting, expectation targeting and covariance estimators."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import copulas, marginals
from .copulas import SingularCorrelationError
from .likelihood import evaluate, natural_to_packed_gradient
from .recursion import FilterError, NonStationaryError, companion, impact
from .types import (
    CopulaParams,
    FullParams,
    MarginalParams,
    MeanParams,
    ModelSpec,
    Panel,
    pack_params,
    targeted_omega,
    unpack_params,
)

log = logging.getLogger(__name__)

BETA_MAX = 0.9999

MODEL_ERRORS = (FilterError, NonStationaryError, SingularCorrelationError, FloatingPointError,
                np.linalg.LinAlgError, ValueError)


# ---------------------------------------------------------------------------
# optimizer


@dataclass
class OptimResult:
    x: np.ndarray
    fun: float
    grad: np.ndarray
    n_iter: int
    converged: bool
    message: str


def _active(x, g, lower, upper):
    return ((x <= lower) & (g > 0)) | ((x >= upper) & (g < 0))


def _projected(x, g, lower, upper):
    return np.where(_active(x, g, lower, upper), 0.0, g)


def projected_bfgs(fun, x0, lower, upper, gtol, max_iter=2000, xtol=1e-10, curvature=None) -> OptimResult:
    """Minimize ``fun(x) -> (f, g)`` over a box with a projected BFGS method.

    A Hessian approximation B is kept; variables sitting on a bound with the
    gradient pushing outward are held fixed and the step solves the reduced
    system on the free ones.  A trial point where ``fun`` raises one of the
    model errors, or returns a non-finite value, is rejected and the step
    halved.  ``curvature(x)``, when given, returns a positive semi-definite
    Hessian approximation used to (re)start B.
    """
    lower = np.asarray(lower, float)
    upper = np.asarray(upper, float)
    x = np.clip(np.asarray(x0, float), lower, upper)
    f, g = fun(x)
    if not np.isfinite(f):
        raise ValueError("objective is not finite at the starting point")
    n = x.size

    def fresh(grad, at):
        if curvature is not None:
            try:
                C = curvature(at)
                C = 0.5 * (C + C.T)
                C = C + (1e-6 * np.trace(C) / n + 1e-12) * np.eye(n)
                if np.all(np.isfinite(C)):
                    return C
            except MODEL_ERRORS:
                pass
        return np.eye(n) * max(1.0, np.abs(grad).max())

    B = fresh(g, x)
    just_reset = True
    msg = "max iterations reached"
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        active = _active(x, g, lower, upper)
        pg = np.where(active, 0.0, g)
        if np.abs(pg).max() < gtol:
            converged, msg = True, "gradient tolerance"
            break
        free = ~active
        d = np.zeros(n)
        try:
            d[free] = -np.linalg.solve(B[np.ix_(free, free)], g[free])
        except np.linalg.LinAlgError:
            d[free] = -g[free]
        if g @ d >= 0:
            B, just_reset = fresh(g, x), True
            d = np.zeros(n)
            d[free] = -np.linalg.solve(B[np.ix_(free, free)], g[free])
        step = 1.0
        ok = False
        while step >= 1e-14:
            xn = np.clip(x + step * d, lower, upper)
            try:
                fn, gn = fun(xn)
            except MODEL_ERRORS:
                fn, gn = np.inf, None
            if np.isfinite(fn) and fn <= f + 1e-4 * (g @ (xn - x)):
                ok = True
                break
            # near the optimum the predicted decrease drops below rounding in f;
            # then accept a step that keeps f within rounding and shrinks the gradient
            if (np.isfinite(fn) and abs(fn - f) <= 1e-13 * max(1.0, abs(f))
                    and np.abs(_projected(xn, gn, lower, upper)).max() < np.abs(pg).max()):
                ok = True
                break
            step *= 0.5
        s = xn - x if ok else np.zeros(n)
        if not ok or np.abs(s).max() < xtol:
            if ok:
                x, f, g = xn, fn, gn
            if just_reset:
                converged = True
                msg = "step tolerance" if ok else "line search made no progress"
                break
            # a stale Hessian approximation can point nowhere useful: restart it
            B, just_reset = fresh(g, x), True
            continue
        y = gn - g
        x, f, g = xn, fn, gn
        just_reset = False
        sy = s @ y
        Bs = B @ s
        sBs = s @ Bs
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y) and sBs > 0:
            B = B + np.outer(y, y) / sy - np.outer(Bs, Bs) / sBs
    return OptimResult(x, f, g, it, converged, msg)


# ---------------------------------------------------------------------------
# results


@dataclass
class FitOptions:
    concentrated: bool = False
    max_iter: int = 2000
    gtol: float = 1e-6
    multistart: bool = True
    start: Optional[FullParams] = None
    extra_starts: tuple = ()
    covariance: bool = True
    hessian_step: float = 1e-4


@dataclass
class FitResult:
    params: FullParams
    spec: ModelSpec
    loglik: float
    T: int
    names: list
    estimates: np.ndarray
    cov: Optional[np.ndarray] = None
    cov_robust: Optional[np.ndarray] = None
    se: Optional[np.ndarray] = None
    tstats: Optional[np.ndarray] = None
    converged: bool = False
    n_iter: int = 0
    grad_norm: float = np.nan
    n_clamped: int = 0
    concentrated: bool = False
    message: str = ""
    labels: tuple = ()
    extra: dict = field(default_factory=dict)

    @property
    def n_free(self) -> int:
        return self.estimates.size

    def coef(self, name: str) -> float:
        return float(self.estimates[self.names.index(name)])

    def stderr(self, name: str) -> float:
        return float(self.se[self.names.index(name)])


def _include_copula(spec, concentrated):
    return not concentrated


def targeting_reparam(theta_free: MeanParams, x_bar) -> MeanParams:
    """Replace omega by the value that makes x_bar the unconditional mean."""
    if not impact(theta_free).spectral_radius < 1:
        raise NonStationaryError("targeting needs a mean-stationary point")
    return theta_free.with_omega(targeted_omega(theta_free, x_bar))


def _bounds(spec: ModelSpec, include_copula: bool):
    n = spec.n_free(include_copula)
    lo = np.full(n, -np.inf)
    hi = np.full(n, np.inf)
    pos = 0
    if not spec.targeting:
        lo[: spec.K] = 1e-10
        pos = spec.K
    for p, (block, lag, i, j) in enumerate(spec.mean_entries(), start=pos):
        if block in ("alpha", "beta") and lag == 0 and i == j:
            lo[p] = 0.0
        if block == "beta" and i == j:
            hi[p] = BETA_MAX
    end = pos + len(spec.mean_entries())
    if include_copula and spec.copula == "student_t":
        m = spec.K * (spec.K - 1) // 2
        k = end + m
        lo[k], hi[k] = np.log(1e-3), np.log(1e6)
    lo[-spec.K:], hi[-spec.K:] = np.log(1e-3), np.log(1e5)
    return lo, hi


def beta_radius(theta: MeanParams) -> float:
    """Spectral radius of the companion matrix of the beta lags.

    Above one, mu_t depends explosively on the pre-sample values and the
    likelihood surface becomes numerically useless.
    """
    if not np.any(theta.beta):
        return 0.0
    return float(np.abs(np.linalg.eigvals(companion(theta.beta))).max())


THETA_STARTS = ((0.2, 0.7), (0.05, 0.93))


def default_theta(spec: ModelSpec, x_bar, alpha1=0.2, beta1=0.7) -> MeanParams:
    """Diagonal starting point with the given lag-1 alpha and beta; omega from targeting."""
    K, L = spec.K, spec.L
    a = np.zeros((L, K, K))
    g = np.zeros((L, K, K))
    b = np.zeros((L, K, K))
    I = np.eye(K)
    if spec.beta[0] != "absent":
        b[0] = beta1 * I
        a[0] = alpha1 * I if spec.alpha[0] != "absent" else 0
    else:
        a[0] = 0.6 * I
    if spec.gamma[0] != "absent":
        g[0] = 0.02 * I
    theta = MeanParams(np.zeros(K), a, g, b)
    return theta.with_omega(targeted_omega(theta, x_bar))


def _objective(panel, spec, mu_bar, include_copula, concentrated):
    T = panel.T
    cache = {}

    def fun(z):
        full = unpack_params(z, spec, mu_bar, include_copula=include_copula)
        if spec.targeting and not impact(full.theta).spectral_radius < 1:
            raise NonStationaryError("non-stationary trial point")
        if not beta_radius(full.theta) < 1:
            raise NonStationaryError("explosive beta recursion")
        # trial points far from the optimum routinely clamp PITs; only the final fit reports clamping
        with np.errstate(all="raise", under="ignore"), warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            ev = evaluate(panel, full, spec, score=True, concentrated=concentrated)
        g = natural_to_packed_gradient(ev.score, full, spec, include_copula)
        if not (np.isfinite(ev.loglik) and np.all(np.isfinite(g))):
            return np.inf, g
        cache["z"], cache["S"] = z.copy(), natural_to_packed_gradient(ev.score_t, full, spec, include_copula)
        return -ev.loglik / T, -g / T

    def opg(z):
        """Outer product of per-observation scores, scaled like the Hessian of -loglik / T."""
        if "z" not in cache or not np.array_equal(cache["z"], z):
            fun(z)
        S = cache["S"]
        return S.T @ S / T**2

    fun.opg = opg
    return fun


def _optimize(panel, spec, start: FullParams, opts: FitOptions, concentrated: bool):
    include_copula = not concentrated
    mu_bar = panel.mean() if spec.targeting else None
    z0 = pack_params(start, spec, include_copula=include_copula)
    lo, hi = _bounds(spec, include_copula)
    fun = _objective(panel, spec, mu_bar, include_copula, concentrated)
    f0, _ = fun(np.clip(z0, lo, hi))
    # |grad loglik|_inf < gtol * max(1, |loglik| / T), expressed for the objective -loglik / T
    gtol = opts.gtol * max(1.0, abs(f0)) / panel.T
    res = projected_bfgs(fun, z0, lo, hi, gtol=gtol, max_iter=opts.max_iter, curvature=fun.opg)
    full = unpack_params(res.x, spec, mu_bar, include_copula=include_copula)
    return res, full


def _start_independent(panel: Panel, spec: ModelSpec, alpha1=0.2, beta1=0.7) -> FullParams:
    x_bar = panel.mean()
    theta = default_theta(spec, x_bar, alpha1, beta1)
    eps = panel.values / x_bar
    try:
        phi = np.clip(marginals.phi_moment_estimator(eps), 0.5, 1e4)
    except ValueError:
        phi = np.ones(spec.K)
    return FullParams(theta, CopulaParams(), MarginalParams(phi), x_bar if spec.targeting else None)


def _copula_start(panel, spec, base: FullParams, nu=8.0) -> FullParams:
    from .recursion import conditional_mean

    mu = conditional_mean(panel, base.theta)[0]
    eps = panel.values / mu
    R = copulas.kendall_R(eps)
    c_free = copulas.c_from_R(R)
    return FullParams(base.theta, CopulaParams(c_free, nu if spec.copula == "student_t" else None),
                      base.marginal, base.mu_bar)


def _phi_moment_start(panel, base: FullParams) -> FullParams:
    from .recursion import conditional_mean

    mu = conditional_mean(panel, base.theta)[0]
    phi = np.clip(marginals.phi_moment_estimator(panel.values / mu), 0.5, 1e4)
    return FullParams(base.theta, base.copula, MarginalParams(phi), base.mu_bar)


def fit(panel: Panel, spec: ModelSpec, options: FitOptions = None, **kw) -> FitResult:
    """Maximum-likelihood fit of a vMEM.

    Starts from an equation-by-equation (independent copula) fit, a
    Kendall-tau correlation for c and moment estimates of phi.  With
    ``options.concentrated`` a Normal-copula model is fitted through the
    concentrated likelihood.
    """
    opts = options or FitOptions(**kw)
    concentrated = opts.concentrated
    if concentrated and spec.copula != "normal":
        raise ValueError("concentrated fitting is only available for the Normal copula")

    candidates = []
    if opts.start is not None:
        candidates.append(opts.start)
    else:
        spec_i = spec.with_(copula="independent")
        eq = equation_by_equation(panel, spec, opts)
        try:
            full_i = _optimize(panel, spec_i, eq, FitOptions(max_iter=opts.max_iter, gtol=1e-4), False)[1]
        except MODEL_ERRORS as exc:
            log.warning("joint independent stage failed: %s", exc)
            full_i = eq
        if spec.copula == "independent":
            candidates.append(full_i)
        else:
            candidates.append(_copula_start(panel, spec, full_i))
            if opts.multistart:
                candidates.append(_copula_start(panel, spec, _phi_moment_start(panel, full_i), nu=30.0))
    candidates += [embed(s, spec, panel) for s in opts.extra_starts]

    best = None
    for start in candidates:
        if concentrated:
            start = FullParams(start.theta, CopulaParams(np.zeros(spec.K * (spec.K - 1) // 2)),
                               start.marginal, start.mu_bar)
        try:
            res, full = _optimize(panel, spec, start, opts, concentrated)
        except MODEL_ERRORS as exc:
            log.warning("start rejected: %s", exc)
            continue
        if best is None or res.fun < best[0].fun:
            best = (res, full)
    if best is None:
        raise FilterError(-1, -1, float("nan"))
    res, full = best
    return _finish(panel, spec, full, res, opts)


def equation_by_equation(panel: Panel, spec: ModelSpec, opts: FitOptions) -> FullParams:
    """Univariate fits of each series (own lags only), assembled into a diagonal start.

    Each equation is tried from every entry of THETA_STARTS (only the first when
    ``opts.multistart`` is off) and the best local optimum is kept.
    """
    K, L = spec.K, spec.L
    flags = {b: tuple("absent" if f == "absent" else "diagonal" for f in getattr(spec, b))
             for b in ("alpha", "gamma", "beta")}
    uspec = ModelSpec(K=1, L=L, copula="independent", targeting=spec.targeting, **flags)
    theta = {b: np.zeros((L, K, K)) for b in ("alpha", "gamma", "beta")}
    omega, phi = np.zeros(K), np.ones(K)
    starts = THETA_STARTS if opts.multistart else THETA_STARTS[:1]
    for k in range(K):
        pk = Panel(panel.values[:, k:k + 1], panel.sign, (panel.labels[k],), panel.dates)
        best = None
        for a1, b1 in starts:
            try:
                res, full = _optimize(pk, uspec, _start_independent(pk, uspec, a1, b1),
                                      FitOptions(max_iter=opts.max_iter, gtol=1e-4), False)
            except MODEL_ERRORS as exc:
                log.warning("univariate start rejected: %s", exc)
                continue
            if best is None or res.fun < best[0].fun:
                best = (res, full)
        if best is None:
            raise FilterError(-1, k, float("nan"))
        th = best[1].theta
        for b in theta:
            theta[b][:, k, k] = getattr(th, b)[:, 0, 0]
        omega[k] = th.omega[0]
        phi[k] = best[1].marginal.phi[0]
    th = MeanParams(omega, theta["alpha"], theta["gamma"], theta["beta"])
    mu_bar = panel.mean() if spec.targeting else None
    if spec.targeting:
        th = th.with_omega(targeted_omega(th, mu_bar))
    return FullParams(th, CopulaParams(), MarginalParams(phi), mu_bar)


def embed(start: FullParams, spec: ModelSpec, panel: Panel) -> FullParams:
    """Carry a solution of a nested model over as a starting point for ``spec``.

    Entries absent from the nested model start at zero; a missing copula gets a
    Kendall-tau correlation and a missing Student-T shape a large nu.
    """
    K = spec.K
    m = K * (K - 1) // 2
    c_free, nu = start.copula.c_free, start.copula.nu
    if spec.copula != "independent" and c_free.size != m:
        c_free = _copula_start(panel, spec, start).copula.c_free
    if spec.copula == "independent":
        c_free = np.zeros(0)
    if spec.copula == "student_t" and nu is None:
        nu = 100.0
    if spec.copula != "student_t":
        nu = None
    mask = {b: np.zeros((spec.L, K, K), bool) for b in ("alpha", "gamma", "beta")}
    for b, l, i, j in spec.mean_entries():
        mask[b][l, i, j] = True
    th = start.theta
    theta = MeanParams(th.omega, np.where(mask["alpha"], th.alpha, 0), np.where(mask["gamma"], th.gamma, 0),
                       np.where(mask["beta"], th.beta, 0))
    mu_bar = panel.mean() if spec.targeting else None
    if spec.targeting:
        theta = theta.with_omega(targeted_omega(theta, mu_bar))
    return FullParams(theta, CopulaParams(c_free, nu), start.marginal, mu_bar)


def _finish(panel, spec, full, res: OptimResult, opts: FitOptions) -> FitResult:
    concentrated = opts.concentrated
    ev = evaluate(panel, full, spec, score=True, concentrated=concentrated)
    if concentrated and spec.K > 1:
        full = FullParams(full.theta, CopulaParams(copulas.c_from_R(ev.R_tilde)), full.marginal, full.mu_bar)
    include_copula = not concentrated
    names = spec.param_names(panel.labels, include_copula)
    est = pack_params(full, spec, transform=False, include_copula=include_copula)
    result = FitResult(
        params=full, spec=spec, loglik=ev.loglik, T=panel.T, names=names, estimates=est,
        converged=res.converged, n_iter=res.n_iter,
        grad_norm=float(np.abs(natural_to_packed_gradient(ev.score, full, spec, include_copula)).max()),
        n_clamped=ev.n_clamped, concentrated=concentrated, message=res.message, labels=panel.labels,
    )
    if opts.covariance:
        try:
            result.cov_robust = robust_covariance(panel, result, opts.hessian_step)
            result.cov = sandwich_covariance(result, panel, opts.hessian_step) if spec.targeting else result.cov_robust
            result.se = np.sqrt(np.diag(result.cov))
            result.tstats = robust_tstats(result)
        except (np.linalg.LinAlgError, *MODEL_ERRORS) as exc:
            log.warning("covariance failed: %s", exc)
    return result


# ---------------------------------------------------------------------------
# covariance


def psd_project(S, floor=1e-10):
    S = 0.5 * (S + S.T)
    vals, vecs = np.linalg.eigh(S)
    return (vecs * np.maximum(vals, floor)) @ vecs.T


def _natural_eval(panel, fit: FitResult, spec=None, mu_bar=None):
    spec = spec or fit.spec
    inc = not fit.concentrated
    mb = fit.params.mu_bar if mu_bar is None else mu_bar

    def at(vec):
        full = unpack_params(vec, spec, mb, transform=False, include_copula=inc)
        return evaluate(panel, full, spec, score=True, concentrated=fit.concentrated)

    return at


def _fd_jacobian(f, x, step):
    """Central differences, falling back to a one-sided difference when one side is infeasible."""
    x = np.asarray(x, float)
    f0 = None
    cols = []
    for k in range(x.size):
        h = step * (1 + abs(x[k]))
        e = np.zeros_like(x)
        e[k] = h
        try:
            up = f(x + e)
        except MODEL_ERRORS:
            up = None
        try:
            dn = f(x - e)
        except MODEL_ERRORS:
            dn = None
        if up is not None and dn is not None:
            cols.append((up - dn) / (2 * h))
            continue
        if f0 is None:
            f0 = f(x)
        if up is None and dn is None:
            raise FilterError(-1, k, float("nan"))
        cols.append((up - f0) / h if up is not None else (f0 - dn) / h)
    return np.column_stack(cols)


def hessian(panel, fit: FitResult, step=1e-4):
    """Average per-observation Hessian, central differences of the analytic score."""
    at = _natural_eval(panel, fit)
    H = _fd_jacobian(lambda v: at(v).score / panel.T, fit.estimates, step)
    return 0.5 * (H + H.T)


def robust_covariance(panel, fit: FitResult, step=1e-4):
    """H^{-1} I H^{-1} / T with I the average outer product of per-t scores."""
    ev = _natural_eval(panel, fit)(fit.estimates)
    S = ev.score_t
    info = S.T @ S / panel.T
    Hinv = np.linalg.inv(hessian(panel, fit, step))
    return psd_project(Hinv @ info @ Hinv.T / panel.T)


def sample_mean_avar(theta: MeanParams, sigma_v, sigma_i, x_second_moment=None):
    """Asymptotic variance of sqrt(T) (x_bar - mu).

    A^{-1} (B S_v B' + C (M (.) S_I) C') A^{-1}' with A = I - sum(alpha + beta + gamma/2),
    B = I - sum beta, C = sum gamma.  M defaults to ``sigma_v``; the variance of the
    centred asymmetric term x_t (I_t - 1/2) is E(x_t x_t') (.) S_I, so pass the second
    moment of x as ``x_second_moment`` for that term.
    """
    K = theta.K
    A = theta.persistence()
    B = np.eye(K) - theta.beta.sum(axis=0)
    C = theta.gamma.sum(axis=0)
    M = sigma_v if x_second_moment is None else x_second_moment
    inner = B @ sigma_v @ B.T + C @ (M * sigma_i) @ C.T
    Ainv = np.linalg.inv(A)
    return Ainv @ inner @ Ainv.T


@dataclass
class TargetingBlocks:
    A: np.ndarray
    B: np.ndarray
    C_gamma: np.ndarray
    Sigma: np.ndarray
    Sigma_v: np.ndarray
    Sigma_I: np.ndarray
    x_second_moment: np.ndarray
    G_theta: np.ndarray
    G_mu: np.ndarray
    M: np.ndarray
    Omega_tt: np.ndarray
    Omega_tm: np.ndarray
    Omega_mm: np.ndarray
    Omega_tm_terms: np.ndarray   # (T, P*K) per-t summands of Omega_tm


def targeting_blocks(fit: FitResult, panel: Panel, step=1e-4) -> TargetingBlocks:
    spec = fit.spec
    K, T = spec.K, panel.T
    theta = fit.params.theta
    mu_bar = np.asarray(fit.params.mu_bar, float)
    at = _natural_eval(panel, fit)
    ev = at(fit.estimates)
    S = ev.score_t
    G_theta = _fd_jacobian(lambda v: at(v).score / T, fit.estimates, step)
    G_theta = 0.5 * (G_theta + G_theta.T)

    def score_mu(m):
        return _natural_eval(panel, fit, mu_bar=m)(fit.estimates).score / T

    G_mu = _fd_jacobian(score_mu, mu_bar, step)

    A = theta.persistence()
    B = np.eye(K) - theta.beta.sum(axis=0)
    Cg = theta.gamma.sum(axis=0)
    Ainv = np.linalg.inv(A)
    x = panel.values
    v = x - ev.mu
    x_tilde = panel.neg - 0.5 * x
    Sigma = np.cov(ev.eps, rowvar=False, bias=True).reshape(K, K)
    Sigma_v = (ev.mu.T @ ev.mu / T) * Sigma
    Sigma_I = 0.25 * np.ones((K, K))
    M2 = x.T @ x / T
    # per-t summands: s_t (B v_t + C x~_t)' A^{-1}'
    right = (v @ B.T + x_tilde @ Cg.T) @ Ainv.T
    terms = np.einsum("tp,tk->tpk", S, right).reshape(T, -1)
    Omega_tm = terms.mean(axis=0).reshape(S.shape[1], K)
    Omega_mm = sample_mean_avar(theta, Sigma_v, Sigma_I, M2)
    return TargetingBlocks(A, B, Cg, Sigma, Sigma_v, Sigma_I, M2, G_theta, G_mu, -np.eye(K),
                           S.T @ S / T, Omega_tm, Omega_mm, terms)


def sandwich_covariance(fit: FitResult, panel: Panel, step=1e-4, blocks: TargetingBlocks = None):
    """Two-step covariance of the targeted estimator (divided by T).

    G^{-1} [I, -G_mu M^{-1}] Omega [I, -G_mu M^{-1}]' G^{-1}' with M = -I.
    """
    b = blocks or targeting_blocks(fit, panel, step)
    P = b.G_theta.shape[0]
    left = np.hstack([np.eye(P), -b.G_mu @ np.linalg.inv(b.M)])
    Omega = np.block([[b.Omega_tt, b.Omega_tm], [b.Omega_tm.T, b.Omega_mm]])
    Ginv = np.linalg.inv(b.G_theta)
    V = Ginv @ left @ Omega @ left.T @ Ginv.T
    return psd_project(V / panel.T)


def robust_tstats(fit: FitResult) -> np.ndarray:
    se = np.sqrt(np.diag(fit.cov))
    return fit.estimates / se
