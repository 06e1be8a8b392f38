"""Node counts of the L2 engine's window counters against two size bounds.

For every live counter at the end of a planted run, prints how its node
count r compares with c/M + 2 and 2c/M + 2, where c is the count since the
counter's oldest node and M the budget of its last full pruning pass.
"""

import argparse
import math
import sys

import numpy as np

from dpslide.hashing import derive_seed
from dpslide.heavy_hitters import L2HeavyHitters, PrivacyConfig
from dpslide.streams import planted_stream


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--m", type=int, default=20_000)
    p.add_argument("--window", type=int, default=5_000)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--alpha", type=float, default=0.2)
    p.add_argument("--gap", type=float, default=0.2, help="histogram gap; sets kappa")
    p.add_argument("--rho", type=float, default=0.014)
    p.add_argument("--runs", type=int, default=5)
    args = p.parse_args(argv)
    kappa = 1000 * math.sqrt(args.gap) * math.log2(args.m)
    for run in range(args.runs):
        cfg = PrivacyConfig(alpha=args.alpha, epsilon=1.0, window=args.window, n=args.n,
                            m=args.m, kappa=kappa, kappa_w=0, seed=derive_seed(7, run),
                            ams_rows=24, ams_reps=7, cs_rows=5, cs_buckets=1024)
        eng = L2HeavyHitters(cfg)
        eng.extend(planted_stream(args.m, args.n, 1, args.rho, seed=run))
        c1, nodes, budget = eng.counter_profile()
        live = budget > 0
        c1, nodes, budget = c1[live], nodes[live], budget[live]
        one = nodes <= c1 / budget + 2
        two = nodes <= 2 * c1 / budget + 2
        print(f"run {run}: {nodes.size} counters, r <= c/M+2: {one.mean():.4f}, "
              f"r <= 2c/M+2: {two.mean():.4f}, max r - c/M - 2: "
              f"{np.max(nodes - c1 / budget - 2):.2f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
