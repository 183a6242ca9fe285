#!/usr/bin/env python3
"""Run the dimension experiment for every config in a directory and merge
the summaries into one report."""
import argparse
import sys
from pathlib import Path

from sheetlab import cli


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--configs", type=Path, default=Path(__file__).parents[1] / "configs")
    ap.add_argument("--out", type=Path, default=Path("runs/dimension"))
    ap.add_argument("--threads", type=int)
    ap.add_argument("--skip", nargs="*", default=["bad_exist.json"])
    args = ap.parse_args()
    status = 0
    for cfg in sorted(args.configs.glob("*.json")):
        if cfg.name in args.skip:
            continue
        print(f"== {cfg.name}", flush=True)
        argv = ["dimension", "--config", str(cfg), "--out", str(args.out)]
        if args.threads:
            argv += ["--threads", str(args.threads)]
        status = max(status, cli.main(argv))
    cli.main(["report", str(args.out)])
    return status


if __name__ == "__main__":
    sys.exit(main())
