"""Repeat a run over many seeds and write one metrics document per setting.

The grid is the cross product of the --alpha and --epsilon lists; every
other field comes from the shared flags.  Output is one JSON line per cell.

    python3 scripts/run_suite.py --mode oneshot-l1 --m 12000 --window 10000 \\
        --generator planted:item=2,rho=0.2 --alpha 0.1 0.2 --trials 20
"""

import argparse
import itertools
import sys
from dataclasses import replace

from dpslide.harness import MODES, RunConfig, dumps, run_experiment


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--mode", choices=[m for m in MODES if m != "oracle"], default="oneshot-l2")
    p.add_argument("--alpha", type=float, nargs="+", default=[0.2])
    p.add_argument("--epsilon", type=float, nargs="+", default=[1.0])
    p.add_argument("--window", type=int, default=1000)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--generator", default="planted:item=1,rho=0.05")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--kappa", type=float, default=1.0)
    p.add_argument("--kappa-w", type=float, default=0.0)
    p.add_argument("--gap", type=float)
    p.add_argument("--ams-rows", type=int)
    p.add_argument("--ams-reps", type=int)
    p.add_argument("--cs-rows", type=int)
    p.add_argument("--cs-buckets", type=int)
    p.add_argument("--no-noise", action="store_true")
    p.add_argument("--output", default="-")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    base = RunConfig(mode=args.mode, window=args.window, n=args.n, m=args.m,
                     generator=args.generator, trials=args.trials, seed=args.seed,
                     kappa=args.kappa, kappa_w=args.kappa_w, gap=args.gap,
                     ams_rows=args.ams_rows, ams_reps=args.ams_reps, cs_rows=args.cs_rows,
                     cs_buckets=args.cs_buckets, noise=not args.no_noise, timing=True)
    out = sys.stdout if args.output == "-" else open(args.output, "w", encoding="utf-8")
    try:
        for alpha, eps in itertools.product(args.alpha, args.epsilon):
            cfg = replace(base, alpha=alpha, epsilon=eps)
            cfg.validate()
            doc = run_experiment(cfg)
            doc.pop("per_trial")
            out.write(dumps(doc) + "\n")
            out.flush()
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
