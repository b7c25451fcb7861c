import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special, stats

from vmem import copulas
from vmem.copulas import build_R, copula_logdensity, grad_u_logc, score_c, score_nu, t_quantile
from vmem.types import CopulaParams

from conftest import central_fd


def c_for_rho(rho):
    return [rho / np.sqrt(1 - rho ** 2)]


def test_build_R_examples():
    _, D, _, R = build_R([1.0])
    assert D[1] == pytest.approx(1 / np.sqrt(2))
    assert R[0, 1] == pytest.approx(1 / np.sqrt(2))
    np.testing.assert_array_equal(build_R(np.zeros(3))[3], np.eye(3))


def test_c_from_R_inverts_build_R(rng):
    c = rng.normal(size=6)
    np.testing.assert_allclose(copulas.c_from_R(build_R(c)[3]), c, rtol=1e-10)


def test_normal_identity_density_is_one(rng):
    u = rng.uniform(size=(20, 3))
    np.testing.assert_allclose(copula_logdensity(u, CopulaParams(np.zeros(3)), "normal"), 0.0, atol=1e-14)


def test_normal_density_at_centre():
    assert copula_logdensity(np.array([0.5, 0.5]), CopulaParams(c_for_rho(0.6)), "normal") == pytest.approx(
        np.log(1.25), abs=1e-12)


def test_student_t_density_at_centre():
    # Gamma(2)Gamma(1)/Gamma(3/2)^2 = 4/pi
    val = np.exp(copula_logdensity(np.array([0.5, 0.5]), CopulaParams([0.0], 2.0), "student_t"))
    assert val == pytest.approx(4 / np.pi, rel=1e-12)


def test_student_t_density_matches_scipy_ratio(rng):
    R = build_R([0.7])[3]
    u = rng.uniform(0.01, 0.99, size=(50, 2))
    nu = 5.0
    q = stats.t.ppf(u, nu)
    ref = stats.multivariate_t(np.zeros(2), R, df=nu).logpdf(q) - stats.t.logpdf(q, nu).sum(axis=1)
    np.testing.assert_allclose(copula_logdensity(u, CopulaParams([0.7], nu), "student_t"), ref, rtol=1e-9)


def test_normal_density_matches_scipy_ratio(rng):
    c = rng.normal(size=3)
    R = build_R(c)[3]
    u = rng.uniform(0.01, 0.99, size=(50, 3))
    q = special.ndtri(u)
    ref = stats.multivariate_normal(np.zeros(3), R).logpdf(q) - stats.norm.logpdf(q).sum(axis=1)
    np.testing.assert_allclose(copula_logdensity(u, CopulaParams(c), "normal"), ref, rtol=1e-9, atol=1e-12)


def test_independent_density_is_zero(rng):
    np.testing.assert_array_equal(copula_logdensity(rng.uniform(size=(4, 2)), CopulaParams(), "independent"), 0)


@pytest.mark.parametrize("family,rho,nu", [("normal", 0.0, None), ("normal", 0.5, None), ("normal", 0.9, None),
                                           ("student_t", 0.5, 4.0), ("student_t", 0.5, 8.0),
                                           ("student_t", 0.5, 30.0)])
def test_density_integrates_to_one(family, rho, nu):
    x, w = np.polynomial.legendre.leggauss(200)
    u, w = (x + 1) / 2, w / 2
    U1, U2 = np.meshgrid(u, u, indexing="ij")
    d = np.exp(copula_logdensity(np.c_[U1.ravel(), U2.ravel()], CopulaParams(c_for_rho(rho), nu), family))
    assert d @ np.outer(w, w).ravel() == pytest.approx(1.0, abs=1e-3)


def test_t_quantile_matches_scipy():
    u = np.concatenate([np.geomspace(1e-12, 0.5, 300), 1 - np.geomspace(1e-12, 0.5, 300)])
    for nu in (2.5, 4.0, 8.0, 30.0, 1e4):
        ref = special.stdtrit(nu, u)
        np.testing.assert_allclose(t_quantile(nu, u), ref, rtol=1e-9, atol=1e-12)


def test_gradient_vanishes_for_identity_normal(rng):
    np.testing.assert_array_equal(grad_u_logc(rng.uniform(size=(5, 3)), CopulaParams(np.zeros(3)), "normal"), 0)


def test_gradient_vanishes_at_centre_for_identity_t():
    d = grad_u_logc(np.full(3, 0.5), CopulaParams(np.zeros(3), 6.0), "student_t")
    np.testing.assert_allclose(d, 0.0, atol=1e-14)


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(["normal", "student_t"]), st.integers(0, 10_000))
def test_gradient_in_u_matches_fd(family, seed):
    g = np.random.default_rng(seed)
    xi = CopulaParams(g.normal(scale=0.7, size=3), 6.0 if family == "student_t" else None)
    u = g.uniform(0.05, 0.95, size=3)
    d = grad_u_logc(u, xi, family)
    fd = central_fd(lambda v: copula_logdensity(v, xi, family), u, rel=1e-6)
    np.testing.assert_allclose(d, fd, atol=1e-6 * max(1, np.abs(fd).max()))


@pytest.mark.parametrize("family,nu", [("normal", None), ("student_t", 6.0)])
def test_score_c_matches_fd(rng, family, nu):
    u = rng.uniform(0.02, 0.98, size=(50, 3))
    c = np.array([0.4, -0.3, 0.6])
    s = score_c(u, CopulaParams(c, nu), family)
    fd = central_fd(lambda v: copula_logdensity(u, CopulaParams(v, nu), family).sum(), c)
    np.testing.assert_allclose(s, fd, atol=1e-5 * max(1, np.abs(fd).max()))


def test_score_c_vanishes_at_copula_optimum(rng):
    from scipy.optimize import minimize

    u = copulas.sample(CopulaParams(np.zeros(3)), "normal", 400, rng)
    res = minimize(lambda v: -copula_logdensity(u, CopulaParams(v), "normal").sum(), np.zeros(3),
                   jac=lambda v: -score_c(u, CopulaParams(v), "normal"), method="BFGS", options={"gtol": 1e-8})
    assert np.abs(score_c(u, CopulaParams(res.x), "normal")).max() < 1e-6


def test_log_kstar_derivative():
    gen = copulas.StudentTGenerator(10.0)
    ref = 0.5 * (special.digamma(6.5) + 2 * special.digamma(5.0) - 3 * special.digamma(5.5))
    assert gen.dlog_kstar(3) == pytest.approx(ref, rel=1e-14)
    h = 1e-5
    fd = (copulas.StudentTGenerator(10 + h).log_kstar(3) - copulas.StudentTGenerator(10 - h).log_kstar(3)) / (2 * h)
    assert gen.dlog_kstar(3) == pytest.approx(fd, rel=1e-7)


@pytest.mark.parametrize("nu", [3.0, 8.0, 40.0])
def test_score_nu_matches_fd(rng, nu):
    u = rng.uniform(0.01, 0.99, size=(60, 3))
    c = np.array([0.5, 0.2, -0.4])
    s = score_nu(u, CopulaParams(c, nu))
    h = 1e-5 * nu
    f = lambda v: copula_logdensity(u, CopulaParams(c, v), "student_t").sum()
    fd = (f(nu + h) - f(nu - h)) / (2 * h)
    assert s == pytest.approx(fd, rel=1e-4, abs=1e-9)


def test_student_t_approaches_normal(rng):
    u = rng.uniform(0.01, 0.99, size=(30, 3))
    c = np.array([0.5, 0.2, -0.4])
    t = copula_logdensity(u, CopulaParams(c, 1e6), "student_t")
    n = copula_logdensity(u, CopulaParams(c), "normal")
    np.testing.assert_allclose(t, n, atol=1e-4)


def test_work_identities(rng):
    xi = CopulaParams(rng.normal(size=3), 5.0)
    w = copulas.elliptical_work(rng.uniform(0.05, 0.95, size=(10, 3)), xi, "student_t")
    np.testing.assert_allclose(w.qq, (w.q_tilde ** 2).sum(axis=1), rtol=1e-10)
    np.testing.assert_allclose(w.C.T @ w.C, w.R, atol=1e-12)


def test_sample_identity_normal_has_no_rank_correlation():
    u = copulas.sample(CopulaParams(np.zeros(1)), "normal", 100_000, 1)
    rho = stats.spearmanr(u[:, 0], u[:, 1]).statistic
    assert abs(rho) < 3 / np.sqrt(100_000)


def test_sample_normal_correlation():
    n, rho = 100_000, 0.9
    q = special.ndtri(copulas.sample(CopulaParams(c_for_rho(rho)), "normal", n, 2))
    r = np.corrcoef(q.T)[0, 1]
    assert abs(r - rho) < 3 * (1 - rho ** 2) / np.sqrt(n)


def test_t_copula_has_tail_dependence():
    n = 400_000
    t = copulas.sample(CopulaParams([0.0], 4.0), "student_t", n, 3)
    z = copulas.sample(CopulaParams([0.0]), "normal", n, 3)
    joint = lambda u: np.mean((u[:, 0] > 0.99) & (u[:, 1] > 0.99))
    assert joint(t) > joint(z)


def test_sampling_reproducible():
    a = copulas.sample(CopulaParams([0.3], 5.0), "student_t", 10, 42)
    b = copulas.sample(CopulaParams([0.3], 5.0), "student_t", 10, 42)
    np.testing.assert_array_equal(a, b)


def test_kendall_R_examples():
    x = np.arange(1.0, 21.0)
    assert copulas.kendall_R(np.c_[x, x ** 2])[0, 1] == pytest.approx(1.0)
    n = 10_000
    ind = copulas.sample(CopulaParams([0.0]), "normal", n, 4)
    assert abs(copulas.kendall_R(ind)[0, 1]) < 3 * np.pi / 2 * np.sqrt(4 / (9 * n))
    dep = copulas.sample(CopulaParams(c_for_rho(0.5)), "normal", n, 5)
    # delta method: tau has sd about sqrt(4/(9n)) under mild dependence, scaled by the sine map
    assert abs(copulas.kendall_R(dep)[0, 1] - 0.5) < 3 * np.pi / 2 * np.sqrt(4 / (9 * n))


def test_nearest_correlation_repairs_indefinite_input():
    R = np.array([[1, 0.9, -0.9], [0.9, 1, 0.9], [-0.9, 0.9, 1.0]])
    out = copulas.nearest_correlation(R)
    np.testing.assert_allclose(np.diag(out), 1.0)
    assert np.linalg.eigvalsh(out).min() > 0


def test_boundary_pit_values_are_clamped_with_warning():
    with pytest.warns(RuntimeWarning, match="clamped"):
        v = copula_logdensity(np.array([[0.0, 0.5]]), CopulaParams([0.5]), "normal")
    assert np.isfinite(v).all()


def test_singular_correlation_guard():
    with pytest.raises(copulas.SingularCorrelationError):
        copulas.elliptical_work(np.full((2, 2), 0.4), CopulaParams([1e9]), "normal")


def test_implied_eps_correlation_below_one():
    out = copulas.implied_eps_correlation(CopulaParams(c_for_rho(0.9)), "normal", [20.0, 20.0], n=50_000)
    assert 0.7 < out[0, 1] < 0.9
