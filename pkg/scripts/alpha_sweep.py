"""Position uncertainty between a taxel pair for several exponents.

Runs ``tviskin analyze`` on configs/alpha_sweep.json and prints the relative
variation of sigma_P across the gap for each alpha.
"""

import json
import sys
from pathlib import Path

from tviskin.cli import main

ROOT = Path(__file__).resolve().parent.parent

if __name__ == "__main__":
    out = Path(sys.argv[1] if len(sys.argv) > 1 else "out/alpha_sweep")
    code = main(["analyze", "--config", str(ROOT / "configs" / "alpha_sweep.json"), "--out", str(out)])
    if code:
        sys.exit(code)
    profiles = json.loads((out / "analysis.json").read_text())["profiles"]
    for alpha, prof in profiles.items():
        print(f"alpha={alpha}: relative variation {prof['relative_variation']:.4f}")
