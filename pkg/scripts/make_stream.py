"""Write a synthetic stream file that the CLI can read back with --input."""

import argparse
import sys

from dpslide.streams import GeneratorSpec, generate_stream, write_stream


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("generator", help="e.g. uniform, zipf:s=1.2, planted:item=7,rho=0.05")
    p.add_argument("--m", type=int, required=True, help="stream length")
    p.add_argument("--n", type=int, default=1000, help="universe size")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--binary", action="store_true", help="write the binary format")
    p.add_argument("--output", default="-", help="file path, or - for stdout")
    args = p.parse_args(argv)
    stream = generate_stream(GeneratorSpec.parse(args.generator, args.m, args.n, args.seed))
    target = sys.stdout.buffer if args.output == "-" else args.output
    write_stream(target, stream, binary=args.binary)
    return 0


if __name__ == "__main__":
    sys.exit(main())
