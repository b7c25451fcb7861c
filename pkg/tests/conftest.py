"""Shared builders for simulated models used across the test modules."""

from pathlib import Path

import numpy as np
import pytest

from vmem.measures import TickDay
from vmem.types import CopulaParams, FullParams, MarginalParams, MeanParams, ModelSpec

DATA = Path(__file__).parent / "data"
CODES = {"independent": "I", "normal": "N", "student_t": "T"}


def grid_truth(structure: str, copula: str, targeting: bool = False):
    """K=3 parameter point in the D/A/AB grid with moderate persistence."""
    K = 3
    spec = ModelSpec.grid(f"{structure}-{CODES[copula]}", K, targeting)
    a1 = np.diag([0.25, 0.2, 0.22])
    b1 = np.diag([0.6, 0.65, 0.6])
    if structure in ("A", "AB"):
        a1 = a1 + np.array([[0, 0.03, 0.02], [0.02, 0, 0.03], [0.01, 0.02, 0]])
    if structure == "AB":
        b1 = b1 + np.array([[0, -0.03, 0.02], [0.02, 0, -0.02], [0.01, 0.02, 0]])
    theta = MeanParams.build([0.1, 0.12, 0.08], K, 2, alpha=[a1, np.diag([-0.05, 0.03, 0.02])],
                             gamma=[np.diag([0.04, 0.02, 0.03])], beta=[b1])
    cop = CopulaParams([0.6, 0.4, 0.8] if copula != "independent" else [],
                       7.0 if copula == "student_t" else None)
    return spec, FullParams(theta, cop, MarginalParams([20.0, 15.0, 18.0]))


def bivariate_truth(copula="student_t", rho=0.5, nu=8.0, targeting=False):
    """K=2 diagonal vMEM(1,1) used for recovery and targeting checks."""
    spec = ModelSpec(K=2, L=1, alpha=("diagonal",), gamma=("absent",), beta=("diagonal",),
                     copula=copula, targeting=targeting)
    theta = MeanParams.build([0.1, 0.15], 2, 1, alpha=np.diag([0.2, 0.25]), beta=np.diag([0.7, 0.6]))
    c = rho / np.sqrt(1 - rho ** 2)
    cop = CopulaParams([c] if copula != "independent" else [], nu if copula == "student_t" else None)
    return spec, FullParams(theta, cop, MarginalParams([20.0, 15.0]))


def brownian_day(rng, n=2340, sigma=0.01, date="2013-01-02", p0=50.0):
    """Noise-free log-Brownian trades at equally spaced times with daily volatility sigma."""
    seconds = 34200 + np.arange(n + 1) * (23400 / n)
    logp = np.log(p0) + np.concatenate([[0], np.cumsum(rng.normal(0, sigma / np.sqrt(n), n))])
    return TickDay(date, seconds, np.exp(logp), np.full(n + 1, 100.0))


def central_fd(f, v, rel=1e-6):
    v = np.asarray(v, float)
    g = np.empty_like(v)
    for k in range(v.size):
        h = rel * max(1.0, abs(v[k]))
        e = np.zeros_like(v)
        e[k] = h
        g[k] = (f(v + e) - f(v - e)) / (2 * h)
    return g


@pytest.fixture
def rng():
    return np.random.default_rng(20240501)
