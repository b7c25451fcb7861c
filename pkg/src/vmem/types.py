"""Value types shared across the package: data panels, model structure and
parameter containers, plus the packing of parameters into an unconstrained
vector for numerical optimization.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import pandas as pd

STRUCTURES = ("absent", "diagonal", "full")
COPULAS = ("independent", "normal", "student_t")
NU_FLOOR = 2.0


class PanelError(ValueError):
    """Raised when a panel violates its invariants."""


def _frozen(a, dtype=float) -> np.ndarray:
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Panel:
    """Daily panel of K nonnegative series over T days.

    ``sign`` is the per-day indicator of a negative return (1) or not (0);
    it multiplies every component of x_t to form the asymmetric term.
    """

    values: np.ndarray
    sign: np.ndarray
    labels: tuple = ()
    dates: np.ndarray = None

    def __post_init__(self):
        values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if values.shape[0] == 1 and np.ndim(self.values) == 1:
            values = values.T
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "sign", _frozen(np.asarray(self.sign).ravel()))
        labels = tuple(self.labels) or tuple(f"x{i + 1}" for i in range(values.shape[1]))
        object.__setattr__(self, "labels", labels)
        if self.dates is None:
            dates = np.arange(values.shape[0])
        else:
            dates = np.asarray(self.dates)
        dates = dates.copy()
        dates.setflags(write=False)
        object.__setattr__(self, "dates", dates)

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def K(self) -> int:
        return self.values.shape[1]

    @property
    def neg(self) -> np.ndarray:
        """The asymmetric regressor x_t * I_t."""
        return self.values * self.sign[:, None]

    def mean(self) -> np.ndarray:
        return self.values.mean(axis=0)

    def slice(self, start=None, stop=None) -> "Panel":
        s = slice(start, stop)
        return Panel(self.values[s], self.sign[s], self.labels, self.dates[s])

    def with_values(self, values) -> "Panel":
        return Panel(values, self.sign, self.labels, self.dates)


def validate_panel(panel: Panel) -> list[str]:
    """Return a list of invariant violations; empty when the panel is valid.

    Row and column positions in the messages are 1-based.
    """
    out = []
    v = panel.values
    if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
        return [f"values must be a non-empty T x K matrix, got shape {v.shape}"]
    T, K = v.shape
    for r, c in zip(*np.nonzero(~(v >= 0))):
        out.append(f"negative or missing value {v[r, c]!r} at ({r + 1},{c + 1})")
    if panel.sign.shape != (T,):
        out.append(f"sign indicator has length {panel.sign.size}, expected {T}")
    else:
        for r in np.nonzero(~np.isin(panel.sign, (0, 1)))[0]:
            out.append(f"sign indicator {panel.sign[r]!r} at row {r + 1} not in {{0,1}}")
    if len(panel.labels) != K:
        out.append(f"{len(panel.labels)} labels for {K} series")
    if len(panel.dates) != T:
        out.append(f"{len(panel.dates)} dates for {T} rows")
    else:
        d = panel.dates
        for r in range(1, T):
            if not d[r] > d[r - 1]:
                out.append(f"date at row {r + 1} not strictly after row {r}")
    return out


def read_panel_csv(path) -> Panel:
    """Read ``date,<label1>,...,<labelK>,neg_return``; ``trend_*`` columns are ignored."""
    df = pd.read_csv(path)
    if "date" not in df.columns or "neg_return" not in df.columns:
        raise PanelError(f"{path}: header must contain 'date' and 'neg_return'")
    labels = [c for c in df.columns if c not in ("date", "neg_return") and not c.startswith("trend_")]
    panel = Panel(
        df[labels].to_numpy(float),
        df["neg_return"].to_numpy(),
        tuple(labels),
        pd.to_datetime(df["date"]).to_numpy(),
    )
    problems = validate_panel(panel)
    if problems:
        raise PanelError(f"{path}: " + "; ".join(problems[:5]))
    return panel


def panel_frame(panel: Panel, trend: Optional[np.ndarray] = None, float_format=None) -> pd.DataFrame:
    dates = panel.dates
    if np.issubdtype(dates.dtype, np.datetime64):
        dates = pd.to_datetime(dates).strftime("%Y-%m-%d")
    df = pd.DataFrame(panel.values, columns=list(panel.labels))
    df.insert(0, "date", dates)
    df["neg_return"] = panel.sign.astype(int)
    if trend is not None:
        for k, lab in enumerate(panel.labels):
            df[f"trend_{lab}"] = trend[:, k]
    return df


def write_panel_csv(panel: Panel, path, trend: Optional[np.ndarray] = None) -> None:
    panel_frame(panel, trend).to_csv(path, index=False, float_format="%.10g")


# ---------------------------------------------------------------------------
# model structure


@dataclass(frozen=True)
class ModelSpec:
    """Structure of the conditional mean and the error distribution.

    ``alpha``, ``gamma`` and ``beta`` hold one structure flag per lag
    (``"absent"``, ``"diagonal"`` or ``"full"``).
    """

    K: int
    L: int = 1
    alpha: tuple = ("diagonal",)
    gamma: tuple = ("absent",)
    beta: tuple = ("diagonal",)
    copula: str = "independent"
    targeting: bool = False

    def __post_init__(self):
        for name in ("alpha", "gamma", "beta"):
            flags = getattr(self, name)
            if isinstance(flags, str):
                flags = (flags,) * self.L
            flags = tuple(flags)
            object.__setattr__(self, name, flags)
            if len(flags) != self.L:
                raise ValueError(f"{name} needs {self.L} structure flags, got {len(flags)}")
            bad = [f for f in flags if f not in STRUCTURES]
            if bad:
                raise ValueError(f"unknown structure flag(s) {bad} for {name}")
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.L < 1:
            raise ValueError("L must be >= 1")
        if self.alpha[0] == "absent" and self.beta[0] == "absent":
            raise ValueError("at least one of alpha_1, beta_1 must be present")
        if self.copula not in COPULAS:
            raise ValueError(f"unknown copula family {self.copula!r}")

    @classmethod
    def grid(cls, label: str, K: int, targeting: bool = True) -> "ModelSpec":
        """Model from the D/A/AB x I/N/T grid.

        Conditional mean: alpha_1 x_{t-1} + alpha_2 x_{t-2} + gamma_1 x^-_{t-1} + beta_1 mu_{t-1}
        with alpha_2 and gamma_1 diagonal; D has alpha_1, beta_1 diagonal, A has alpha_1 full,
        AB has alpha_1 and beta_1 full.
        """
        mean, cop = label.upper().split("-")
        a1, b1 = {"D": ("diagonal", "diagonal"), "A": ("full", "diagonal"), "AB": ("full", "full")}[mean]
        copula = {"I": "independent", "N": "normal", "T": "student_t"}[cop]
        return cls(
            K=K,
            L=2,
            alpha=(a1, "diagonal"),
            gamma=("diagonal", "absent"),
            beta=(b1, "absent"),
            copula=copula,
            targeting=targeting,
        )

    def entries(self, block: str, lag: int) -> list[tuple[int, int]]:
        flag = getattr(self, block)[lag]
        if flag == "absent":
            return []
        if flag == "diagonal":
            return [(i, i) for i in range(self.K)]
        return [(i, j) for i in range(self.K) for j in range(self.K)]

    def mean_entries(self) -> list[tuple[str, int, int, int]]:
        """Free coefficient entries as (block, lag, row, col), lag 0-based."""
        out = []
        for lag in range(self.L):
            for block in ("alpha", "gamma", "beta"):
                out.extend((block, lag, i, j) for i, j in self.entries(block, lag))
        return out

    @property
    def n_copula(self) -> int:
        if self.copula == "independent":
            return 0
        m = self.K * (self.K - 1) // 2
        return m + (self.copula == "student_t")

    def n_free(self, include_copula: bool = True) -> int:
        n = (0 if self.targeting else self.K) + len(self.mean_entries()) + self.K
        return n + (self.n_copula if include_copula else 0)

    def param_names(self, labels: Sequence[str] = None, include_copula: bool = True) -> list[str]:
        labels = list(labels) if labels else [f"x{i + 1}" for i in range(self.K)]
        names = [] if self.targeting else [f"omega[{labels[i]}]" for i in range(self.K)]
        names += [f"{b}{l + 1}[{labels[i]},{labels[j]}]" for b, l, i, j in self.mean_entries()]
        if include_copula and self.copula != "independent":
            iu = np.triu_indices(self.K, 1)
            names += [f"c[{labels[i]},{labels[j]}]" for i, j in zip(*iu)]
            if self.copula == "student_t":
                names.append("nu")
        names += [f"phi[{labels[i]}]" for i in range(self.K)]
        return names

    def with_(self, **kw) -> "ModelSpec":
        d = dict(K=self.K, L=self.L, alpha=self.alpha, gamma=self.gamma, beta=self.beta,
                 copula=self.copula, targeting=self.targeting)
        d.update(kw)
        return ModelSpec(**d)


# ---------------------------------------------------------------------------
# parameters


@dataclass(frozen=True)
class MeanParams:
    """Conditional-mean coefficients; alpha, gamma, beta are (L, K, K) stacks."""

    omega: np.ndarray
    alpha: np.ndarray
    gamma: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        omega = np.atleast_1d(np.asarray(self.omega, float))
        K = omega.size
        for name in ("alpha", "gamma", "beta"):
            a = np.asarray(getattr(self, name), float)
            if a.ndim == 0:
                a = a.reshape(1, 1, 1)
            elif a.ndim == 2:
                a = a[None]
            elif a.ndim == 1 and K == 1:
                a = a.reshape(-1, 1, 1)
            if a.shape[1:] != (K, K):
                raise ValueError(f"{name} has shape {a.shape}, expected (L, {K}, {K})")
            object.__setattr__(self, name, _frozen(a))
        object.__setattr__(self, "omega", _frozen(omega))
        L = {self.alpha.shape[0], self.gamma.shape[0], self.beta.shape[0]}
        if len(L) != 1:
            raise ValueError("alpha, gamma, beta must have the same number of lags")

    @property
    def K(self) -> int:
        return self.omega.size

    @property
    def L(self) -> int:
        return self.alpha.shape[0]

    @classmethod
    def build(cls, omega, K=None, L=1, alpha=None, gamma=None, beta=None) -> "MeanParams":
        """Convenience constructor; missing blocks are zero, per-lag lists are accepted."""
        omega = np.atleast_1d(np.asarray(omega, float))
        K = K or omega.size

        def stack(blk):
            out = np.zeros((L, K, K))
            if blk is None:
                return out
            a = np.asarray(blk, float)
            if a.ndim == 0:
                a = a.reshape(1, 1, 1)
            elif a.ndim == 1:
                # K == 1: one scalar per lag; otherwise a diagonal for lag 1
                a = a.reshape(-1, 1, 1) if K == 1 else np.diag(a)[None]
            elif a.ndim == 2:
                a = a[None]
            out[: a.shape[0]] = a
            return out

        return cls(omega, stack(alpha), stack(gamma), stack(beta))

    def impact(self) -> np.ndarray:
        """Per-lag impact matrices A_l = alpha_l + beta_l + gamma_l / 2, shape (L, K, K)."""
        return self.alpha + self.beta + 0.5 * self.gamma

    def persistence(self) -> np.ndarray:
        """I - sum_l A_l."""
        return np.eye(self.K) - self.impact().sum(axis=0)

    def with_omega(self, omega) -> "MeanParams":
        return MeanParams(omega, self.alpha, self.gamma, self.beta)


def mean_params_violations(theta: MeanParams, spec: ModelSpec) -> list[str]:
    out = []
    if theta.K != spec.K or theta.L != spec.L:
        return [f"theta has K={theta.K}, L={theta.L}; spec has K={spec.K}, L={spec.L}"]
    for block in ("alpha", "gamma", "beta"):
        arr = getattr(theta, block)
        for lag in range(spec.L):
            allowed = np.zeros((spec.K, spec.K), bool)
            for i, j in spec.entries(block, lag):
                allowed[i, j] = True
            for i, j in zip(*np.nonzero((arr[lag] != 0) & ~allowed)):
                out.append(f"{block}{lag + 1}[{i},{j}] = {arr[lag, i, j]} outside structure")
    if np.any(theta.omega < 0):
        out.append("omega has negative entries")
    return out


@dataclass(frozen=True)
class CopulaParams:
    """Free upper-triangular elements of c (row-major order) and the Student-T shape."""

    c_free: np.ndarray = field(default_factory=lambda: np.zeros(0))
    nu: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "c_free", _frozen(np.atleast_1d(np.asarray(self.c_free, float))))
        if self.nu is not None:
            if not self.nu > 0:
                raise ValueError(f"nu must be positive, got {self.nu}")
            object.__setattr__(self, "nu", float(self.nu))

    def correlation(self, K: int) -> np.ndarray:
        from .copulas import build_R

        if K == 1 or self.c_free.size == 0:
            return np.eye(K)
        return build_R(self.c_free)[3]


@dataclass(frozen=True)
class MarginalParams:
    """Gamma(phi_i, phi_i) shapes: unit mean, variance 1/phi_i."""

    phi: np.ndarray

    def __post_init__(self):
        phi = _frozen(np.atleast_1d(np.asarray(self.phi, float)))
        if not np.all(phi > 0):
            raise ValueError(f"phi must be strictly positive, got {phi}")
        object.__setattr__(self, "phi", phi)


@dataclass(frozen=True)
class FullParams:
    theta: MeanParams
    copula: CopulaParams
    marginal: MarginalParams
    mu_bar: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.mu_bar is not None:
            object.__setattr__(self, "mu_bar", _frozen(np.atleast_1d(self.mu_bar)))


def targeted_omega(theta: MeanParams, mu_bar) -> np.ndarray:
    """omega implied by an unconditional mean: [I - sum(alpha + beta + gamma/2)] mu_bar."""
    return theta.persistence() @ np.asarray(mu_bar, float)


def pack_params(full: FullParams, spec: ModelSpec, transform: bool = True,
                include_copula: bool = True) -> np.ndarray:
    """Flatten parameters in the order omega, mean entries, c_free, nu, phi.

    With ``transform`` nu maps to log(nu - 2) and phi to log(phi); everything else
    passes through. omega is left out under targeting.
    """
    th = full.theta
    if th.K != spec.K or th.L != spec.L:
        raise ValueError("parameters do not match the model structure")
    parts = [] if spec.targeting else [th.omega]
    parts.append(np.array([getattr(th, b)[l, i, j] for b, l, i, j in spec.mean_entries()]))
    if include_copula and spec.copula != "independent":
        m = spec.K * (spec.K - 1) // 2
        if full.copula.c_free.size != m:
            raise ValueError(f"expected {m} free c elements, got {full.copula.c_free.size}")
        parts.append(full.copula.c_free)
        if spec.copula == "student_t":
            nu = full.copula.nu
            parts.append([np.log(nu - NU_FLOOR) if transform else nu])
    phi = full.marginal.phi
    parts.append(np.log(phi) if transform else phi)
    return np.concatenate([np.atleast_1d(np.asarray(p, float)) for p in parts])


def unpack_params(vec, spec: ModelSpec, mu_bar=None, transform: bool = True,
                  include_copula: bool = True) -> FullParams:
    vec = np.asarray(vec, float)
    n = spec.n_free(include_copula)
    if vec.shape != (n,):
        raise ValueError(f"parameter vector has length {vec.size}, expected {n}")
    K, L = spec.K, spec.L
    pos = 0
    if spec.targeting:
        omega = np.zeros(K)
    else:
        omega = vec[:K].copy()
        pos = K
    blocks = {b: np.zeros((L, K, K)) for b in ("alpha", "gamma", "beta")}
    for b, l, i, j in spec.mean_entries():
        blocks[b][l, i, j] = vec[pos]
        pos += 1
    theta = MeanParams(omega, blocks["alpha"], blocks["gamma"], blocks["beta"])
    c_free, nu = np.zeros(0), None
    if include_copula and spec.copula != "independent":
        m = K * (K - 1) // 2
        c_free = vec[pos:pos + m]
        pos += m
        if spec.copula == "student_t":
            nu = NU_FLOOR + np.exp(vec[pos]) if transform else vec[pos]
            pos += 1
    phi = vec[pos:pos + K]
    phi = np.exp(phi) if transform else phi
    if spec.targeting:
        if mu_bar is None:
            raise ValueError("targeting needs the unconditional mean mu_bar")
        theta = theta.with_omega(targeted_omega(theta, mu_bar))
    return FullParams(theta, CopulaParams(c_free, nu), MarginalParams(phi),
                      None if mu_bar is None else np.asarray(mu_bar, float))
