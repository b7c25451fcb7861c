"""Generate the synthetic tick fixtures bundled under tests/data.

tiny_ticks.csv      three short days, used for the measure golden values
pipeline_ticks.csv.gz  a longer sample driven by a simulated vMEM, used for the
                    measure -> detrend -> fit -> forecast pipeline
"""

import argparse
from pathlib import Path

import numpy as np
import pandas as pd

from vmem import recursion
from vmem.cli import demo_params
from vmem.measures import TickDay, write_ticks_csv
from vmem.types import ModelSpec

OPEN, CLOSE = 9.5 * 3600, 16 * 3600


def synth_day(date, rng, sigma, n, volume, price0, noise=0.0):
    sec = np.sort(rng.uniform(OPEN, CLOSE, n))
    steps = rng.normal(0.0, sigma / np.sqrt(n), n)
    steps[0] = 0.0
    logp = np.log(price0) + np.cumsum(steps) + noise * rng.standard_normal(n)
    w = rng.gamma(2.0, 1.0, n)
    sizes = np.maximum(1, np.round(volume * w / w.sum()))
    return TickDay(date, np.round(sec, 3), np.round(np.exp(logp), 4), sizes)


def tiny(rng):
    dates = ["2013-07-29", "2013-07-30", "2013-07-31"]
    days = [synth_day(d, rng, s, n, v, 60.0) for d, s, n, v in
            zip(dates, (0.012, 0.008, 0.015), (120, 90, 150), (2.0e5, 1.5e5, 2.6e5))]
    # a constant-price stretch gives the kernel a zero-return day
    flat = TickDay("2013-08-01", np.linspace(OPEN, CLOSE, 40), np.full(40, 61.0), np.full(40, 100.0))
    return days + [flat]


def pipeline(rng, T):
    spec = ModelSpec.grid("A-N", 3, targeting=False)
    full = demo_params(spec)
    panel = recursion.simulate(full, spec, T, 20131231)
    dates = pd.bdate_range("2012-01-02", periods=T).strftime("%Y-%m-%d")
    trend = np.exp(0.3 * np.sin(np.linspace(0, 3, T)))
    days, price = [], 60.0
    for t in range(T):
        vol, volu, trd = panel.values[t] * np.array([0.01, 3.0e5, 150.0]) * trend[t]
        n = max(10, int(round(trd)))
        day = synth_day(dates[t], rng, vol, n, volu, price, noise=1e-4)
        days.append(day)
        price = day.prices[-1]
    return days


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--outdir", default=str(Path(__file__).resolve().parents[1] / "tests" / "data"))
    ap.add_argument("--days", type=int, default=260)
    args = ap.parse_args()
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    write_ticks_csv(tiny(np.random.default_rng(7)), out / "tiny_ticks.csv")
    write_ticks_csv(pipeline(np.random.default_rng(11), args.days), out / "pipeline_ticks.csv.gz")
    print("fixtures written to", out)


if __name__ == "__main__":
    main()
