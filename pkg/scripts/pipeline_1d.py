"""Simulate, fit, train and evaluate the 1D line device end to end.

Usage: python3 scripts/pipeline_1d.py [--config configs/pipeline_1d.json] [--out DIR]
The last line printed is ``omega_ml=..., omega_theory=...``.
"""

import argparse
import sys
from pathlib import Path

from tviskin.cli import main

ROOT = Path(__file__).resolve().parent.parent


def run(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(ROOT / "configs" / "pipeline_1d.json"))
    ap.add_argument("--out", default="out/pipeline_1d")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    out = Path(args.out)
    common = ["--config", args.config, "--out", str(out), "--seed", str(args.seed)]
    steps = [
        ["simulate", *common],
        ["fit", "--dataset", str(out / "scan.csv"), *common],
        ["train", "--dataset", str(out / "scan.csv"), *common],
        ["evaluate", "--dataset", str(out / "scan.csv"), "--weights", str(out), *common],
    ]
    for step in steps:
        code = main(step)
        if code:
            return code
    return 0


if __name__ == "__main__":
    sys.exit(run())
