"""Two-contact discrimination: local-maximum rule against the least-squares oracle.

Runs ``tviskin discriminate`` on configs/discriminate.json and prints the summary.
"""

import json
import sys
from pathlib import Path

from tviskin.cli import main

ROOT = Path(__file__).resolve().parent.parent

if __name__ == "__main__":
    out = Path(sys.argv[1] if len(sys.argv) > 1 else "out/discriminate")
    code = main(["discriminate", "--config", str(ROOT / "configs" / "discriminate.json"),
                 "--out", str(out)])
    if code:
        sys.exit(code)
    print(json.dumps(json.loads((out / "discrimination_summary.json").read_text()), indent=2))
