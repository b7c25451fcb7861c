"""Compare the Monte Carlo variance of sqrt(T)(xbar - mu) with its closed form.

The population moments entering the closed form come from one long path.

    python scripts/asymptotics_mc.py --paths 2000 --n-obs 2000
"""

import time
from dataclasses import dataclass

import numpy as np

from _config import parse_config
from vmem import recursion
from vmem.estimation import sample_mean_avar
from vmem.types import CopulaParams, FullParams, MarginalParams, MeanParams, ModelSpec


@dataclass
class Config:
    paths: int = 2000
    n_obs: int = 2000
    long_path: int = 400_000
    gamma1: float = 0.1
    gamma2: float = 0.12
    seed: int = 1


def main():
    cfg = parse_config(Config, __doc__.splitlines()[0])
    spec = ModelSpec(K=2, L=1, alpha=("full",), gamma=("diagonal",), beta=("diagonal",), copula="normal")
    for gam in ([cfg.gamma1, cfg.gamma2], [0.0, 0.0]):
        t0 = time.time()
        th = MeanParams.build([0.1, 0.15], 2, 1, alpha=np.array([[0.15, 0.05], [0.03, 0.2]]),
                              beta=np.diag([0.6, 0.55]), gamma=np.diag(gam))
        full = FullParams(th, CopulaParams([0.6]), MarginalParams([10.0, 8.0]))
        x, _ = recursion.simulate_paths(full, spec, cfg.n_obs, cfg.paths, cfg.seed)
        mc = np.cov((np.sqrt(cfg.n_obs) * (x.mean(axis=1) - recursion.unconditional_mean(th))).T)
        xl, _, m, e = recursion.simulate_paths(full, spec, cfg.long_path, 1, cfg.seed + 1, return_mu=True)
        Sv = (m[0].T @ m[0] / cfg.long_path) * np.cov(e[0].T, bias=True)
        closed = sample_mean_avar(th, Sv, 0.25 * np.ones((2, 2)), xl[0].T @ xl[0] / cfg.long_path)
        print(f"gamma = {gam}")
        print("  Monte Carlo\n", np.round(mc, 4))
        print("  closed form\n", np.round(closed, 4))
        print(f"  relative Frobenius error {np.linalg.norm(mc - closed) / np.linalg.norm(closed):.3f}"
              f" ({time.time() - t0:.0f}s)")


if __name__ == "__main__":
    main()
