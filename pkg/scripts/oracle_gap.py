#!/usr/bin/env python3
"""Optimality gap of the joint optimiser against exhaustive search on reduced instances."""
import argparse
import time

import numpy as np

from uavcache import harness
from uavcache.config import load_config


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default="configs/reduced.yaml")
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--tol", type=float, default=0.05)
    args = ap.parse_args(argv)

    start = time.perf_counter()
    rows = harness.oracle_check(load_config(args.config), range(args.seeds), args.tol)
    gaps = np.array([r["gap"] for r in rows])
    for r in rows:
        print(f"seed {r['seed']:>3}: proposed {r['proposed']:.4f} oracle {r['oracle']:.4f} gap {r['gap']:.4f}")
    print(f"max gap {gaps.max():.4f}, mean {gaps.mean():.4f}, "
          f"{sum(r['ok'] for r in rows)}/{len(rows)} within {args.tol}; {time.perf_counter() - start:.1f} s")
    return 0 if all(r["ok"] for r in rows) else 1


if __name__ == "__main__":
    raise SystemExit(main())
