#!/usr/bin/env python3
"""Tabulate the scale integral checks for a config: closed forms where they
exist, block and global scaling laws, slice increments, and the sigma lower
bound scan."""
import argparse

from sheetlab.config import ExperimentConfig
from sheetlab.scale import sigma_lower_bound_scan, verify_scaling_laws


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", required=True)
    ap.add_argument("--trials", type=int, default=5)
    ap.add_argument("--pairs", type=int, default=200)
    args = ap.parse_args()
    spec = ExperimentConfig.load(args.config).sheet_spec()
    rep = verify_scaling_laws(spec, trials=args.trials)
    print(f"{'check':16s} {'block':>5s} {'c':>6s} {'rel_err':>10s} {'tol':>8s}")
    for r in rep.rows:
        print(f"{r.check:16s} {r.block:5d} {r.c:6.2f} {r.rel_err:10.2e} {r.tol:8.1e}"
              f"  {'ok' if r.passed else 'FAIL'}")
    s = sigma_lower_bound_scan(spec, n_pairs=args.pairs)
    print(f"sigma / tau^H over {s.n_pairs} pairs: min {s.min_ratio:.4g}, "
          f"median {s.median_ratio:.4g} ({'ok' if s.ok else 'FAIL'})")


if __name__ == "__main__":
    main()
