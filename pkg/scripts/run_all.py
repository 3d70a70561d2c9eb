#!/usr/bin/env python3
"""Run every experiment file in scripts/experiments and write CSVs to results/.

Usage: python3 scripts/run_all.py [--trials T] [--workers W] [--out DIR]
"""

import argparse
import sys
from pathlib import Path

from irs_noma.sim.cli import main as cli_main

HERE = Path(__file__).resolve().parent


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--trials", type=int, default=None, help="override every file")
    parser.add_argument("--workers", type=int, default=None)
    parser.add_argument("--out", default="results")
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    worst = 0
    for path in sorted((HERE / "experiments").glob("*.ini")):
        print(f"== {path.stem}")
        argv = ["run", str(path), "--out", str(out / f"{path.stem}.csv")]
        if args.trials is not None:
            argv += ["--trials", str(args.trials)]
        if args.workers is not None:
            argv += ["--workers", str(args.workers)]
        worst = max(worst, cli_main(argv))
    return worst


if __name__ == "__main__":
    sys.exit(main())
