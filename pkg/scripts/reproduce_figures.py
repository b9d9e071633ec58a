#!/usr/bin/env python3
"""Run every sweep in configs/ and write plot-ready series for fig2..fig5.

    python3 scripts/reproduce_figures.py --out results
    python3 scripts/reproduce_figures.py --quick      # 200 trials per N, for a smoke run
"""

import argparse
import sys
from pathlib import Path

from cmmlab.cli import main as cli

ROOT = Path(__file__).resolve().parent.parent
FIGURES = {
    "fig2": ["fig2_closed_form", "fig2_mc"],
    "fig3": ["fig3_uniform_mc"],
    "fig4": ["fig3_uniform_mc"],
    "fig5": ["fig5_weighted_uniform", "fig5_weighted_orthogonal"],
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=ROOT / "results")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--quick", action="store_true", help="cap trials at 200 per N")
    ap.add_argument("--figures", nargs="+", choices=sorted(FIGURES), default=sorted(FIGURES))
    args = ap.parse_args()

    names = sorted({n for f in args.figures for n in FIGURES[f]})
    for name in names:
        argv = ["run", "--config", str(ROOT / "configs" / f"{name}.toml"), "--out", str(args.out), "--threads", str(args.threads)]
        if args.quick:
            argv += ["--trials", "200"]
        print(f"== {name}", flush=True)
        if cli(argv) != 0:
            return 1
    for fig in args.figures:
        csvs = [str(args.out / f"{n}.csv") for n in FIGURES[fig]]
        if cli(["plot-data", "--figure", fig, "--out", str(args.out), *csvs]) != 0:
            return 1
    return cli(["compare", *[str(args.out / f"{n}.csv") for n in names]])


if __name__ == "__main__":
    sys.exit(main())
