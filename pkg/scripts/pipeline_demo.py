"""Run measure -> detrend -> fit -> forecast on the bundled synthetic ticks.

Daily kernels are computed in parallel when VMEM_THREADS > 1.

    VMEM_THREADS=4 python scripts/pipeline_demo.py --outdir demo
"""

from dataclasses import dataclass
from pathlib import Path

from _config import parse_config
from vmem.cli import main as vmem

DATA = Path(__file__).resolve().parents[1] / "tests" / "data"


@dataclass
class Config:
    ticks: str = str(DATA / "pipeline_ticks.csv.gz")
    outdir: str = "pipeline_demo"
    split: str = "2012-10-01"
    grid: str = "D-I,D-N,D-T,A-I,A-N,A-T,AB-N,AB-T"


def main():
    cfg = parse_config(Config, __doc__.splitlines()[0])
    out = Path(cfg.outdir)
    out.mkdir(parents=True, exist_ok=True)
    steps = [
        ["measure", "--ticks", cfg.ticks, "--out", out / "panel.csv"],
        ["detrend", "--panel", out / "panel.csv", "--out", out / "detrended.csv"],
        ["fit", "--panel", out / "detrended.csv", "--grid", cfg.grid, "--split", cfg.split, "--outdir", out / "fit"],
        ["forecast", "--panel", out / "detrended.csv", "--fits", out / "fit" / "fits.json", "--split", cfg.split,
         "--outdir", out / "forecast"],
    ]
    for s in steps:
        code = vmem([str(a) for a in s])
        if code:
            raise SystemExit(code)
    print((out / "fit" / "report.txt").read_text())
    print((out / "forecast" / "dm_report.txt").read_text())


if __name__ == "__main__":
    main()
