"""Nonlinear synthetic benchmark (quadratic, exponential and sine effects)."""

import argparse
from pathlib import Path

from reproduce_linear import run

REFERENCE_C = {"buckley_james": 0.8419, "ipcw": 0.8281, "transform": 0.8365}

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--epochs", type=int, default=1500)
    ap.add_argument("--out", type=Path, default=Path("results/nonlinear.json"))
    args = ap.parse_args()
    run("nonlinear", REFERENCE_C, args.seed, args.epochs, args.out)
