"""Daily activity measures from intraday trades, and multiplicative trend removal.

Realized volatility is a Parzen realized kernel on tick-by-tick log returns.
Trends are removed by fitting a penalized cubic regression spline to the log
series and dividing the original by its exponential.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import partial
from typing import Optional

import numpy as np
import pandas as pd
from scipy.interpolate import BSpline

from .parallel import pmap
from .types import Panel

ANNUALIZE = 100.0 * math.sqrt(252.0)


class NegativeKernelError(ValueError):
    """The kernel-weighted autocovariance sum came out negative."""

    def __init__(self, raw_sum: float):
        super().__init__(f"realized kernel sum is negative ({raw_sum:.6g})")
        self.raw_sum = raw_sum


# ---------------------------------------------------------------------------
# ticks


@dataclass(frozen=True)
class TickDay:
    """Trades of one day; ``seconds`` counts from midnight."""

    date: str
    seconds: np.ndarray
    prices: np.ndarray
    sizes: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.seconds, float)
        p = np.asarray(self.prices, float)
        z = np.asarray(self.sizes, float)
        if not (s.shape == p.shape == z.shape and s.ndim == 1):
            raise ValueError("seconds, prices and sizes must be equal-length vectors")
        if s.size > 1 and np.any(np.diff(s) < 0):
            raise ValueError(f"{self.date}: timestamps must be nondecreasing")
        if np.any(~(p > 0)):
            raise ValueError(f"{self.date}: prices must be positive")
        if np.any(~(z >= 0)):
            raise ValueError(f"{self.date}: sizes must be nonnegative")
        object.__setattr__(self, "seconds", s)
        object.__setattr__(self, "prices", p)
        object.__setattr__(self, "sizes", z)

    @property
    def n(self) -> int:
        return self.prices.size


def read_ticks_csv(path) -> list[TickDay]:
    """Read ``timestamp,price,size`` (optionally with a ``date`` column).

    Timestamps are either full date-times, or times of day when a ``date``
    column is present.  Days come back in date order.
    """
    df = pd.read_csv(path)
    missing = {"timestamp", "price", "size"} - set(df.columns)
    if missing:
        raise ValueError(f"{path}: missing column(s) {sorted(missing)}")
    if "date" in df.columns:
        stamp = pd.to_datetime(df["date"].astype(str) + " " + df["timestamp"].astype(str))
    else:
        stamp = pd.to_datetime(df["timestamp"])
    df = df.assign(_stamp=stamp, _date=stamp.dt.strftime("%Y-%m-%d")).sort_values("_stamp", kind="stable")
    days = []
    for date, g in df.groupby("_date", sort=True):
        t = g["_stamp"]
        sec = (t - t.dt.normalize()).dt.total_seconds().to_numpy()
        days.append(TickDay(date, sec, g["price"].to_numpy(float), g["size"].to_numpy(float)))
    return days


def write_ticks_csv(days, path) -> None:
    rows = []
    for d in days:
        for s, p, z in zip(d.seconds, d.prices, d.sizes):
            h, rem = divmod(float(s), 3600.0)
            m, sec = divmod(rem, 60.0)
            rows.append((d.date, f"{int(h):02d}:{int(m):02d}:{sec:09.6f}", p, int(z)))
    pd.DataFrame(rows, columns=["date", "timestamp", "price", "size"]).to_csv(
        path, index=False, float_format="%.6f")


# ---------------------------------------------------------------------------
# realized kernel


def parzen(x):
    """Parzen weight; even in x, zero outside [-1, 1]."""
    a = np.abs(np.asarray(x, float))
    out = np.where(a <= 0.5, 1 - 6 * a**2 + 6 * a**3, np.where(a <= 1, 2 * (1 - a) ** 3, 0.0))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class RKConfig:
    bin_minutes: float = 15.0
    bandwidth_const: float = 3.51
    bandwidth: Optional[int] = None   # force H instead of the data-driven choice
    annualize: bool = False

    def __post_init__(self):
        if not self.bin_minutes > 0:
            raise ValueError("bin_minutes must be positive")
        if self.bandwidth is not None and self.bandwidth < 0:
            raise ValueError("bandwidth must be >= 0")


def autocovariances(x, H: int) -> np.ndarray:
    """gamma_h = sum_{j>h} x_j x_{j-h} for h = 0..H."""
    x = np.asarray(x, float)
    return np.array([x[h:] @ x[: x.size - h] for h in range(H + 1)])


def bin_returns(seconds, log_prices, bin_minutes: float) -> np.ndarray:
    """Log returns over consecutive bins, sampling the last price at or before each edge."""
    width = 60.0 * bin_minutes
    edges = np.arange(seconds[0], seconds[-1] + width, width)
    if edges[-1] < seconds[-1]:
        edges = np.append(edges, seconds[-1])
    idx = np.searchsorted(seconds, edges, side="right") - 1
    sampled = log_prices[np.clip(idx, 0, None)]
    sampled[-1] = log_prices[-1]
    return np.diff(sampled)


def bandwidth(x, x_bin, const: float = 3.51) -> int:
    """H = ceil(c n^{3/5} (omega^2 / IV)^{2/5}), omega^2 = sum x^2 / 2n, IV = sum of squared bin returns.

    Capped at n - 1.
    """
    n = x.size
    rv_bin = float(np.sum(np.square(x_bin)))
    noise = float(np.sum(np.square(x))) / (2 * n)
    if noise == 0:
        return 0
    if rv_bin == 0:
        return n - 1
    H = math.ceil(const * n ** 0.6 * (noise / rv_bin) ** 0.4)
    return int(min(H, n - 1))


def realized_kernel(day: TickDay, cfg: RKConfig = RKConfig(), return_details: bool = False):
    """Parzen realized kernel volatility of one day.

    sqrt(gamma_0 + 2 sum_{h=1}^H k(h/H) gamma_h) on tick log returns.
    """
    if day.n < 2:
        raise ValueError(f"{day.date}: a kernel estimate needs at least two ticks")
    logp = np.log(day.prices)
    x = np.diff(logp)
    n = x.size
    if cfg.bandwidth is not None:
        H = int(min(cfg.bandwidth, n - 1))
    else:
        H = bandwidth(x, bin_returns(day.seconds, logp, cfg.bin_minutes), cfg.bandwidth_const)
    g = autocovariances(x, H)
    if H == 0:
        total = g[0]
    else:
        w = parzen(np.arange(1, H + 1) / H)
        total = g[0] + 2 * float(w @ g[1:])
    if total < 0:
        raise NegativeKernelError(total)
    rkv = math.sqrt(total)
    if cfg.annualize:
        rkv *= ANNUALIZE
    return (rkv, H) if return_details else rkv


def aggregate_daily(day: TickDay) -> tuple[float, int]:
    """Total traded volume and number of trades."""
    if day.n == 0:
        warnings.warn(f"{day.date}: no trades", RuntimeWarning, stacklevel=2)
        return 0.0, 0
    return float(day.sizes.sum()), int(day.n)


@dataclass(frozen=True)
class DailyMeasures:
    dates: tuple
    rkv: np.ndarray
    volume: np.ndarray
    trades: np.ndarray
    neg_return: np.ndarray
    bandwidths: np.ndarray

    def panel(self, scale_units: bool = True) -> Panel:
        """(vol, volume, trades) panel; volume in millions and trades in thousands when scaling."""
        vol_scale, trade_scale = (1e-6, 1e-3) if scale_units else (1.0, 1.0)
        values = np.column_stack([self.rkv, self.volume * vol_scale, self.trades * trade_scale])
        return Panel(values, self.neg_return, ("vol", "volume", "trades"),
                     pd.to_datetime(list(self.dates)).to_numpy())


def _day_kernel(day, cfg):
    return realized_kernel(day, cfg, return_details=True)


def daily_measures(days, cfg: RKConfig = RKConfig()) -> DailyMeasures:
    """Kernel volatility, volume, trade count and negative-return flag for each day.

    Days with fewer than two ticks are skipped with a warning.  The daily
    return is close-to-close; the first day uses open-to-close.
    """
    kept = []
    for d in days:
        if d.n < 2:
            warnings.warn(f"{d.date}: fewer than two ticks, day skipped", RuntimeWarning, stacklevel=2)
        else:
            kept.append(d)
    kernels = pmap(partial(_day_kernel, cfg=cfg), kept)
    rows = []
    prev_close = None
    for d, (rkv, H) in zip(kept, kernels):
        vol, n = aggregate_daily(d)
        ref = d.prices[0] if prev_close is None else prev_close
        rows.append((d.date, rkv, vol, n, int(d.prices[-1] < ref), H))
        prev_close = d.prices[-1]
    if not rows:
        raise ValueError("no day with enough ticks")
    dates, rkv, vol, n, neg, H = zip(*rows)
    return DailyMeasures(tuple(dates), np.array(rkv), np.array(vol), np.array(n, float),
                         np.array(neg, int), np.array(H, int))


# ---------------------------------------------------------------------------
# detrending


@dataclass(frozen=True)
class TrendModel:
    knots: np.ndarray        # full knot vector including boundary repeats
    coef: np.ndarray         # B-spline coefficients
    lam: float               # smoothing parameter
    fitted: np.ndarray       # fitted log trend, length T
    gcv: float

    @property
    def level(self) -> np.ndarray:
        return np.exp(self.fitted)

    @property
    def last_level(self) -> float:
        return float(np.exp(self.fitted[-1]))


def _knot_vector(T: int, spacing: int, degree: int = 3) -> np.ndarray:
    inner = np.arange(0, T - 1, spacing, dtype=float)
    inner = np.append(inner, float(T - 1)) if inner[-1] < T - 1 else inner
    return np.concatenate([[inner[0]] * degree, inner, [inner[-1]] * degree])


def _spline_design(T: int, knots: np.ndarray, degree: int = 3):
    return BSpline.design_matrix(np.arange(T, dtype=float), knots, degree).toarray()


def detrend(series, smoothing="auto", knot_spacing: int = 20, n_grid: int = 25,
            grid=(1e-4, 1e6)) -> tuple[TrendModel, np.ndarray]:
    """Fit a log trend and return (model, series / exp(trend)).

    Cubic B-splines with a knot every ``knot_spacing`` observations and a
    second-difference penalty on the coefficients.  ``smoothing="auto"`` picks
    the penalty weight by generalized cross-validation over ``n_grid``
    log-spaced values; a number fixes it.
    """
    y = np.asarray(series, float)
    if y.ndim != 1 or y.size < 4:
        raise ValueError("detrend needs a 1-D series of at least four points")
    if np.any(~(y > 0)):
        raise ValueError("detrend needs strictly positive values")
    T = y.size
    z = np.log(y)
    knots = _knot_vector(T, knot_spacing)
    B = _spline_design(T, knots)
    p = B.shape[1]
    Dm = np.diff(np.eye(p), n=2, axis=0)
    BtB, Btz, P = B.T @ B, B.T @ z, Dm.T @ Dm

    def solve(lam):
        A = BtB + lam * P
        coef = np.linalg.solve(A, Btz)
        edf = np.trace(np.linalg.solve(A, BtB))
        rss = float(np.sum((z - B @ coef) ** 2))
        denom = (1 - edf / T) ** 2
        return coef, (rss / T) / denom if denom > 0 else np.inf

    if smoothing == "auto":
        lams = np.geomspace(grid[0], grid[1], n_grid)
        fits = [solve(l) for l in lams]
        k = int(np.argmin([f[1] for f in fits]))
        lam, (coef, gcv) = float(lams[k]), fits[k]
    else:
        lam = float(smoothing)
        if lam < 0:
            raise ValueError("smoothing must be nonnegative")
        coef, gcv = solve(lam)
    fitted = B @ coef
    return TrendModel(knots, coef, lam, fitted, float(gcv)), np.exp(z - fitted)


def detrend_panel(panel: Panel, **kw) -> tuple[list[TrendModel], Panel]:
    models, cols = [], []
    for k in range(panel.K):
        m, d = detrend(panel.values[:, k], **kw)
        models.append(m)
        cols.append(d)
    return models, panel.with_values(np.column_stack(cols))


def retrend(forecasts, trend):
    """Scale detrended forecasts back by the last in-sample trend level.

    ``trend`` is a TrendModel, a list of them (one per column) or plain levels.
    """
    f = np.asarray(forecasts, float)
    if isinstance(trend, TrendModel):
        level = trend.last_level
    elif isinstance(trend, (list, tuple)) and trend and isinstance(trend[0], TrendModel):
        level = np.array([m.last_level for m in trend])
    else:
        level = np.asarray(trend, float)
    return f * level
