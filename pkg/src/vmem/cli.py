"""Command-line front end: measure, detrend, simulate, fit, forecast, diagnose.

Settings come from built-in defaults, then the matching section of an INI file
given with ``--config``, then command-line flags.  Exit codes: 0 success,
1 model error, 2 input/output error.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np
import pandas as pd

from . import diagnostics, estimation, measures, recursion
from .copulas import SingularCorrelationError
from .marginals import MarginalDomainError
from .types import (
    CopulaParams,
    FullParams,
    MarginalParams,
    MeanParams,
    ModelSpec,
    Panel,
    PanelError,
    panel_frame,
    read_panel_csv,
    write_panel_csv,
)

log = logging.getLogger("vmem")

DEFAULT_GRID = ("D-I", "A-I", "A-N", "A-T", "AB-N", "AB-T")
BASELINE = "D-I"

DEFAULTS = {
    "measure": {"ticks": None, "out": "panel.csv", "bin_minutes": "15", "bandwidth_const": "3.51",
                "annualize": "yes", "scale_units": "yes"},
    "detrend": {"panel": None, "out": "detrended.csv", "knot_spacing": "20", "smoothing": "auto"},
    "simulate": {"spec": "A-T", "n_series": "3", "n_days": "1000", "seed": "1", "burn_in": "500", "params": None,
                 "out": "simulated.csv", "start": "2010-01-04"},
    "fit": {"panel": None, "outdir": "fit_out", "grid": ",".join(DEFAULT_GRID), "split": None,
            "targeting": "yes", "concentrated": "no", "lb_lags": "12,22,32"},
    "forecast": {"panel": None, "fits": None, "split": None, "outdir": "forecast_out", "baseline": BASELINE},
    "diagnose": {"panel": None, "fits": None, "split": None, "out": "diagnostics.csv", "lb_lags": "12,22,32"},
}


class ModelFailure(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# parameter serialization


def spec_to_dict(spec: ModelSpec) -> dict:
    return dict(K=spec.K, L=spec.L, alpha=list(spec.alpha), gamma=list(spec.gamma), beta=list(spec.beta),
                copula=spec.copula, targeting=spec.targeting)


def spec_from_dict(d: dict) -> ModelSpec:
    return ModelSpec(K=d["K"], L=d["L"], alpha=tuple(d["alpha"]), gamma=tuple(d["gamma"]),
                     beta=tuple(d["beta"]), copula=d["copula"], targeting=d["targeting"])


def params_to_dict(full: FullParams) -> dict:
    th = full.theta
    return dict(
        omega=th.omega.tolist(), alpha=th.alpha.tolist(), gamma=th.gamma.tolist(), beta=th.beta.tolist(),
        c_free=full.copula.c_free.tolist(), nu=full.copula.nu, phi=full.marginal.phi.tolist(),
        mu_bar=None if full.mu_bar is None else full.mu_bar.tolist(),
    )


def params_from_dict(d: dict) -> FullParams:
    th = MeanParams(np.array(d["omega"]), np.array(d["alpha"]), np.array(d["gamma"]), np.array(d["beta"]))
    return FullParams(th, CopulaParams(np.array(d.get("c_free", [])), d.get("nu")),
                      MarginalParams(np.array(d["phi"])), None if d.get("mu_bar") is None else np.array(d["mu_bar"]))


def demo_params(spec: ModelSpec) -> FullParams:
    """A stationary parameter set for simulation when none is supplied."""
    K, L = spec.K, spec.L
    rng_off = 0.03 * (np.ones((K, K)) - np.eye(K))
    alpha = np.zeros((L, K, K))
    gamma = np.zeros((L, K, K))
    beta = np.zeros((L, K, K))
    for lag in range(L):
        for block, arr, diag in (("alpha", alpha, 0.25 if lag == 0 else -0.05),
                                 ("gamma", gamma, 0.04), ("beta", beta, 0.65)):
            flag = getattr(spec, block)[lag]
            if flag == "absent":
                continue
            arr[lag] = diag * np.eye(K)
            if flag == "full":
                arr[lag] += rng_off if block == "alpha" else -0.5 * rng_off
    theta = MeanParams(np.zeros(K), alpha, gamma, beta)
    theta = theta.with_omega(theta.persistence() @ np.ones(K))
    m = K * (K - 1) // 2
    c_free = np.full(m, 0.6) if spec.copula != "independent" else np.zeros(0)
    nu = 8.0 if spec.copula == "student_t" else None
    phi = np.linspace(20.0, 15.0, K) if K > 1 else np.array([20.0])
    return FullParams(theta, CopulaParams(c_free, nu), MarginalParams(phi))


# ---------------------------------------------------------------------------
# config handling


def _flag(v) -> bool:
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "yes", "true", "on"):
        return True
    if s in ("0", "no", "false", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _settings(command: str, args: argparse.Namespace) -> dict:
    out = dict(DEFAULTS[command])
    if args.config:
        cp = configparser.ConfigParser()
        if not cp.read(args.config):
            raise OSError(f"cannot read config file {args.config}")
        if cp.has_section(command):
            out.update({k: v for k, v in cp.items(command)})
    for k in DEFAULTS[command]:
        v = getattr(args, k, None)
        if v is not None:
            out[k] = v
    return out


def _require(cfg, *keys):
    for k in keys:
        if not cfg.get(k):
            raise OSError(f"missing required setting '{k}'")


def _split_panel(panel: Panel, split):
    """In-sample rows are dates <= split; returns (in_sample_rows, full panel)."""
    if not split:
        return panel.T
    cut = np.datetime64(pd.Timestamp(split))
    n = int(np.sum(panel.dates <= cut))
    if n < 1 or n >= panel.T:
        raise ValueError(f"split date {split} is not inside the sample")
    return n


# ---------------------------------------------------------------------------
# measure / detrend / simulate


def cmd_measure(cfg: dict) -> Path:
    _require(cfg, "ticks")
    days = measures.read_ticks_csv(cfg["ticks"])
    rk = measures.RKConfig(bin_minutes=float(cfg["bin_minutes"]), bandwidth_const=float(cfg["bandwidth_const"]),
                           annualize=_flag(cfg["annualize"]))
    dm = measures.daily_measures(days, rk)
    panel = dm.panel(scale_units=_flag(cfg["scale_units"]))
    out = Path(cfg["out"])
    write_panel_csv(panel, out)
    return out


def cmd_detrend(cfg: dict) -> Path:
    _require(cfg, "panel")
    panel = read_panel_csv(cfg["panel"])
    smoothing = cfg["smoothing"]
    smoothing = smoothing if smoothing == "auto" else float(smoothing)
    models, det = measures.detrend_panel(panel, smoothing=smoothing, knot_spacing=int(cfg["knot_spacing"]))
    trend = np.column_stack([m.level for m in models])
    out = Path(cfg["out"])
    write_panel_csv(det, out, trend=trend)
    return out


def cmd_simulate(cfg: dict) -> Path:
    spec = ModelSpec.grid(cfg["spec"], int(cfg["n_series"]), targeting=False)
    if cfg.get("params"):
        with open(cfg["params"]) as fh:
            full = params_from_dict(json.load(fh))
    else:
        full = demo_params(spec)
    T = int(cfg["n_days"])
    labels = ("vol", "volume", "trades") if spec.K == 3 else tuple(f"x{i + 1}" for i in range(spec.K))
    panel = recursion.simulate(full, spec, T, int(cfg["seed"]), burn_in=int(cfg["burn_in"]), labels=labels)
    dates = pd.bdate_range(cfg["start"], periods=T).to_numpy()
    panel = Panel(panel.values, panel.sign, panel.labels, dates)
    out = Path(cfg["out"])
    write_panel_csv(panel, out)
    return out


# ---------------------------------------------------------------------------
# fit


COPULA_ORDER = {"independent": 0, "normal": 1, "student_t": 2}


def is_nested(small: ModelSpec, big: ModelSpec) -> bool:
    """True when every free coefficient of ``small`` is free in ``big`` and its copula nests."""
    return (small.K == big.K and small.L == big.L
            and set(small.mean_entries()) <= set(big.mean_entries())
            and COPULA_ORDER[small.copula] <= COPULA_ORDER[big.copula])


def _fit_one(panel, label, targeting, concentrated, starts=()):
    spec = ModelSpec.grid(label, panel.K, targeting=targeting)
    opts = estimation.FitOptions(concentrated=concentrated and spec.copula == "normal",
                                 extra_starts=tuple(starts))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        try:
            return estimation.fit(panel, spec, opts), None
        except (ValueError, np.linalg.LinAlgError) as exc:
            return None, str(exc)


def fit_grid(panel: Panel, grid, targeting=True, concentrated=False):
    """Fit every cell; each cell is also started from the solutions of the cells nested in it."""
    order = sorted(grid, key=lambda g: (len(ModelSpec.grid(g, panel.K).mean_entries()),
                                        COPULA_ORDER[ModelSpec.grid(g, panel.K).copula]))
    out = {}
    for label in order:
        spec = ModelSpec.grid(label, panel.K, targeting=targeting)
        starts = [f.params for g, (f, _) in out.items() if f is not None and is_nested(f.spec, spec)]
        out[label] = _fit_one(panel, label, targeting, concentrated, starts)
    return {g: out[g] for g in grid}


def _fmt(v, nd=4):
    if v is None or (isinstance(v, float) and not np.isfinite(v)):
        return ""
    return f"{v:.{nd}f}"


def _regressor_rows(labels, i):
    """Row keys for the equation of series i in display order."""
    rows = [(f"alpha1[{labels[i]},{labels[j]}]", f"{labels[j]}_(t-1)") for j in [i] + [j for j in range(len(labels)) if j != i]]
    rows.append((f"alpha2[{labels[i]},{labels[i]}]", f"{labels[i]}_(t-2)"))
    rows.append((f"gamma1[{labels[i]},{labels[i]}]", f"{labels[i]}-_(t-1)"))
    rows += [(f"beta1[{labels[i]},{labels[j]}]", f"mu[{labels[j]}]_(t-1)") for j in [i] + [j for j in range(len(labels)) if j != i]]
    rows.append((f"omega[{labels[i]}]", "const"))
    return rows


def equation_table(fits: dict, labels, i, diag: dict) -> list[str]:
    cols = list(fits)
    width = 12
    head = f"{'':<20}" + "".join(f"{c:>{width}}" for c in cols)
    lines = [f"Equation for {labels[i]}", head, "-" * len(head)]
    for name, disp in _regressor_rows(labels, i):
        if not any(f is not None and name in f.names for f in fits.values()):
            continue
        est_row, t_row = f"{disp:<20}", f"{'':<20}"
        for c in cols:
            f = fits[c]
            if f is not None and name in f.names:
                k = f.names.index(name)
                est = _fmt(f.estimates[k])
                ts = f"({_fmt(f.tstats[k], 2)})" if f.tstats is not None else "()"
            else:
                est = ts = ""
            est_row += f"{est:>{width}}"
            t_row += f"{ts:>{width}}"
        lines += [est_row, t_row]
    lines.append("-" * len(head))
    for j in range(len(labels)):
        if j == i:
            continue
        row = f"{labels[i] + ' <- ' + labels[j]:<20}"
        for c in cols:
            p = diag.get(c, {}).get("causality", {}).get((i, j))
            row += f"{_fmt(p):>{width}}"
        lines.append(row)
    lines.append("-" * len(head))
    for key, nd in (("loglik", 2), ("aic", 2), ("bic", 2)):
        row = f"{'logLik' if key == 'loglik' else key.upper():<20}"
        for c in cols:
            row += f"{_fmt(diag.get(c, {}).get(key), nd):>{width}}"
        lines.append(row)
    lines.append("-" * len(head))
    for m in diag.get("_lags", ()):
        row = f"{'LB(' + str(m) + ')':<20}"
        for c in cols:
            row += f"{_fmt(diag.get(c, {}).get('lb', {}).get(m)):>{width}}"
        lines.append(row)
    return lines


def fit_diagnostics(panel: Panel, fits: dict, lb_lags) -> dict:
    out = {"_lags": tuple(lb_lags)}
    for label, f in fits.items():
        if f is None:
            continue
        mu = recursion.conditional_mean(panel, f.params.theta)[0]
        eps = panel.values / mu
        aic, bic = diagnostics.information_criteria(f.loglik, f.n_free, panel.T)
        try:
            lb = diagnostics.ljung_box_joint(eps, lb_lags)
            lbd = dict(zip(lb.lags, lb.pvalues))
        except (ValueError, np.linalg.LinAlgError):
            lbd = {}
        caus = {}
        for i in range(panel.K):
            for j in range(panel.K):
                if i != j and f.cov is not None and f"alpha1[{panel.labels[i]},{panel.labels[j]}]" in f.names:
                    caus[(i, j)] = diagnostics.causality_wald(f, j, i).pvalue
        out[label] = dict(loglik=f.loglik, aic=aic, bic=bic, lb=lbd, causality=caus, n_free=f.n_free)
    return out


def phi_table(fits, labels) -> list[str]:
    cols = list(fits)
    lines = ["Gamma marginal shapes", f"{'':<12}" + "".join(f"{c:>10}" for c in cols)]
    for k, lab in enumerate(labels):
        row = f"{'phi[' + lab + ']':<12}"
        for c in cols:
            f = fits[c]
            row += f"{_fmt(f.params.marginal.phi[k], 2) if f is not None else '':>10}"
        lines.append(row)
    return lines


def correlation_table(fits, labels) -> list[str]:
    cols = [c for c, f in fits.items() if f is not None and f.spec.copula != "independent"]
    K = len(labels)
    lines = ["Copula correlation matrices"]
    if not cols:
        return lines + ["(no copula models)"]
    lines.append(f"{'':<12}" + "".join(f"{c + ':' + labels[j]:>16}" for c in cols for j in range(1, K)))
    for i in range(K - 1):
        row = f"{labels[i]:<12}"
        for c in cols:
            R = fits[c].params.copula.correlation(K)
            for j in range(1, K):
                row += f"{(f'{R[i, j]:.3f}' if j > i else ''):>16}"
        lines.append(row)
    return lines


def _coef_frame(fits) -> pd.DataFrame:
    rows = []
    for label, f in fits.items():
        if f is None:
            continue
        for k, name in enumerate(f.names):
            rows.append(dict(model=label, parameter=name, estimate=f.estimates[k],
                             se=f.se[k] if f.se is not None else np.nan,
                             tstat=f.tstats[k] if f.tstats is not None else np.nan,
                             se_untargeted=np.sqrt(f.cov_robust[k, k]) if f.cov_robust is not None else np.nan))
    return pd.DataFrame(rows, columns=["model", "parameter", "estimate", "se", "tstat", "se_untargeted"])


def _diag_frame(diag, labels) -> pd.DataFrame:
    rows = []
    for label, d in diag.items():
        if label.startswith("_"):
            continue
        rows += [dict(model=label, test="logLik", detail="", statistic=d["loglik"], pvalue=np.nan),
                 dict(model=label, test="AIC", detail="", statistic=d["aic"], pvalue=np.nan),
                 dict(model=label, test="BIC", detail="", statistic=d["bic"], pvalue=np.nan)]
        for m, p in d["lb"].items():
            rows.append(dict(model=label, test="LB", detail=str(m), statistic=np.nan, pvalue=p))
        for (i, j), p in d["causality"].items():
            rows.append(dict(model=label, test="causality", detail=f"{labels[i]}<-{labels[j]}", statistic=np.nan, pvalue=p))
    return pd.DataFrame(rows, columns=["model", "test", "detail", "statistic", "pvalue"])


def cmd_fit(cfg: dict) -> Path:
    _require(cfg, "panel")
    panel = read_panel_csv(cfg["panel"])
    n_in = _split_panel(panel, cfg.get("split"))
    sample = panel.slice(0, n_in)
    grid = [g.strip() for g in str(cfg["grid"]).split(",") if g.strip()]
    if not grid:
        raise ValueError("empty model grid")
    lb_lags = [int(v) for v in str(cfg["lb_lags"]).split(",")]
    results = fit_grid(sample, grid, _flag(cfg["targeting"]), _flag(cfg["concentrated"]))
    fits = {g: results[g][0] for g in grid}
    outdir = Path(cfg["outdir"])
    outdir.mkdir(parents=True, exist_ok=True)
    diag = fit_diagnostics(sample, fits, lb_lags)
    labels = sample.labels
    lines = [f"vMEM fits: T = {sample.T}, K = {sample.K}, series = {', '.join(labels)}", ""]
    for g in grid:
        f, err = results[g]
        status = "failed: " + err if f is None else ("converged" if f.converged else "NOT converged") + f" ({f.message}, {f.n_iter} iterations)"
        lines.append(f"{g}: {status}")
    lines.append("")
    for i in range(sample.K):
        lines += equation_table(fits, labels, i, diag) + [""]
    lines += phi_table(fits, labels) + [""]
    lines += correlation_table(fits, labels) + [""]
    (outdir / "report.txt").write_text("\n".join(lines))
    _coef_frame(fits).to_csv(outdir / "coefficients.csv", index=False, float_format="%.10g")
    _diag_frame(diag, labels).to_csv(outdir / "diagnostics.csv", index=False, float_format="%.10g")
    store = {g: dict(spec=spec_to_dict(f.spec), params=params_to_dict(f.params), loglik=f.loglik,
                     converged=f.converged, concentrated=f.concentrated)
             for g, f in fits.items() if f is not None}
    (outdir / "fits.json").write_text(json.dumps(dict(labels=list(labels), T=sample.T, fits=store), indent=1))
    if all(f is None for f in fits.values()):
        raise ModelFailure("no model in the grid could be fitted")
    return outdir


# ---------------------------------------------------------------------------
# forecast / diagnose


def _load_fits(path):
    with open(path) as fh:
        data = json.load(fh)
    return {g: (spec_from_dict(d["spec"]), params_from_dict(d["params"])) for g, d in data["fits"].items()}


def _trend_columns(path, panel: Panel):
    df = pd.read_csv(path)
    cols = [f"trend_{lab}" for lab in panel.labels]
    if all(c in df.columns for c in cols):
        return df[cols].to_numpy(float)
    return np.ones_like(panel.values)


def one_step_forecasts(panel: Panel, full: FullParams, start: int) -> np.ndarray:
    """Rolling one-step conditional means for rows start..T-1 with fixed parameters."""
    return recursion.conditional_mean(panel, full.theta, init=panel.slice(0, start).mean())[0][start:]


def cmd_forecast(cfg: dict) -> Path:
    _require(cfg, "panel", "fits", "split")
    panel = read_panel_csv(cfg["panel"])
    trend = _trend_columns(cfg["panel"], panel)
    n_in = _split_panel(panel, cfg["split"])
    fits = _load_fits(cfg["fits"])
    base = cfg["baseline"]
    if base not in fits:
        raise ModelFailure(f"baseline model {base} missing from {cfg['fits']}")
    outdir = Path(cfg["outdir"])
    outdir.mkdir(parents=True, exist_ok=True)
    labels = panel.labels
    x_det = panel.values[n_in:]
    x_orig = x_det * trend[n_in:]
    last_level = trend[n_in - 1]
    fc_rows, loss = [], {}
    dates = pd.to_datetime(panel.dates[n_in:]).strftime("%Y-%m-%d")
    for g, (spec, full) in fits.items():
        mu = one_step_forecasts(panel, full, n_in)
        mu_orig = measures.retrend(mu, last_level)
        for t in range(mu.shape[0]):
            fc_rows.append([g, dates[t]] + list(mu[t]) + list(mu_orig[t]))
        loss[g] = {"detrended": [diagnostics.losses(x_det[:, k], mu[:, k]) for k in range(panel.K)],
                   "original": [diagnostics.losses(x_orig[:, k], mu_orig[:, k]) for k in range(panel.K)]}
    cols = ["model", "date"] + [f"mu_{l}" for l in labels] + [f"mu_{l}_original" for l in labels]
    pd.DataFrame(fc_rows, columns=cols).to_csv(outdir / "forecasts.csv", index=False, float_format="%.10g")

    dm_rows = []
    for g in fits:
        for scale in ("detrended", "original"):
            for k, lab in enumerate(labels):
                for lname in ("e_N", "e_G"):
                    la, lb = loss[base][scale][k], loss[g][scale][k]
                    a = la.e_N if lname == "e_N" else la.e_G_loss
                    b = lb.e_N if lname == "e_N" else lb.e_G_loss
                    r = diagnostics.diebold_mariano(a, b, 1)
                    dm_rows.append(dict(model=g, series=lab, loss=lname, scale=scale,
                                        mean_loss=float(np.nanmean(b)),
                                        statistic=r.statistic if r.defined else np.nan,
                                        pvalue=r.pvalue if r.defined else np.nan,
                                        significant=int(r.significant), defined=int(r.defined)))
    dm = pd.DataFrame(dm_rows)
    dm.to_csv(outdir / "dm.csv", index=False, float_format="%.10g")
    lines = [f"Diebold-Mariano statistics against {base} (positive: challenger has smaller loss; * 5% significant)",
             f"hold-out: {len(dates)} days from {dates[0]} to {dates[-1]}", ""]
    models = [g for g in fits if g != base]
    for lname in ("e_N", "e_G"):
        lines.append(f"loss {lname}" + (" (negated so that smaller is better)" if lname == "e_G" else ""))
        head = f"{'':<16}" + "".join(f"{m + ' det':>14}{m + ' orig':>14}" for m in models)
        lines.append(head)
        for lab in labels:
            row = f"{lab:<16}"
            for m in models:
                for scale in ("detrended", "original"):
                    r = dm[(dm.model == m) & (dm.series == lab) & (dm.loss == lname) & (dm.scale == scale)].iloc[0]
                    cell = "undef" if not r.defined else f"{r.statistic:.2f}" + ("*" if r.significant else "")
                    row += f"{cell:>14}"
            lines.append(row)
        lines.append("")
    (outdir / "dm_report.txt").write_text("\n".join(lines))
    return outdir


def cmd_diagnose(cfg: dict) -> Path:
    _require(cfg, "panel", "fits")
    panel = read_panel_csv(cfg["panel"])
    sample = panel.slice(0, _split_panel(panel, cfg.get("split")))
    lb_lags = [int(v) for v in str(cfg["lb_lags"]).split(",")]
    rows = []
    for g, (spec, full) in _load_fits(cfg["fits"]).items():
        mu = recursion.conditional_mean(sample, full.theta)[0]
        lb = diagnostics.ljung_box_joint(sample.values / mu, lb_lags)
        for m, q, p in zip(lb.lags, lb.statistics, lb.pvalues):
            rows.append(dict(model=g, test="LB", detail=str(m), statistic=q, pvalue=p))
        from .likelihood import loglik

        ll = loglik(sample, full, spec)
        aic, bic = diagnostics.information_criteria(ll, spec.n_free(), sample.T)
        rows += [dict(model=g, test="logLik", detail="", statistic=ll, pvalue=np.nan),
                 dict(model=g, test="AIC", detail="", statistic=aic, pvalue=np.nan),
                 dict(model=g, test="BIC", detail="", statistic=bic, pvalue=np.nan)]
    out = Path(cfg["out"])
    pd.DataFrame(rows, columns=["model", "test", "detail", "statistic", "pvalue"]).to_csv(
        out, index=False, float_format="%.10g")
    return out


# ---------------------------------------------------------------------------
# entry point

COMMANDS = {"measure": cmd_measure, "detrend": cmd_detrend, "simulate": cmd_simulate, "fit": cmd_fit,
            "forecast": cmd_forecast, "diagnose": cmd_diagnose}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vmem", description="copula vMEM toolkit")
    p.add_argument("--config", help="INI file with one section per command")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name, keys in DEFAULTS.items():
        sp = sub.add_parser(name)
        for k in keys:
            sp.add_argument("--" + k.replace("_", "-"), dest=k, default=None)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = _settings(args.command, args)
        out = COMMANDS[args.command](cfg)
    except (OSError, PanelError, pd.errors.ParserError, pd.errors.EmptyDataError, json.JSONDecodeError,
            configparser.Error, KeyError) as exc:
        print(f"vmem {args.command}: I/O error: {exc}", file=sys.stderr)
        return 2
    except (ModelFailure, ValueError, np.linalg.LinAlgError, SingularCorrelationError,
            MarginalDomainError, recursion.FilterError) as exc:
        print(f"vmem {args.command}: model error: {exc}", file=sys.stderr)
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
