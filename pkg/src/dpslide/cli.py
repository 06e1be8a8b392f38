"""Command-line entry point.

Flags mirror the `RunConfig` fields in kebab-case.  `--config FILE` reads
``key = value`` lines (``#`` starts a comment) with the same keys in either
snake_case or kebab-case; flags given on the command line win over the file.

Exit codes: 0 on success, 2 on a configuration error, 3 on an input error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import fields

from .continual import NOISE_SCALES
from .harness import (
    MODES, RunConfig, dumps, load_stream, run_continual, run_experiment, run_oneshot, run_oracle,
)
from .streams import StreamInputError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INPUT = 3


class ConfigError(ValueError):
    pass


def _parse_bool(text) -> bool:
    if isinstance(text, bool):
        return text
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _field_types() -> dict:
    out = {}
    for f in fields(RunConfig):
        t = str(f.type)
        if "bool" in t:
            out[f.name] = _parse_bool
        elif "int" in t:
            out[f.name] = int
        elif "float" in t:
            out[f.name] = float
        else:
            out[f.name] = str
    return out


FIELD_TYPES = _field_types()


def _convert(name: str, value):
    if name not in FIELD_TYPES:
        raise ConfigError(f"unknown config key {name!r}")
    if isinstance(value, str) and value.strip().lower() in ("none", "null", ""):
        return None
    try:
        return FIELD_TYPES[name](value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {name}: {value!r} ({exc})") from exc


def read_config_file(path: str) -> dict:
    """Parse a ``key = value`` file into RunConfig keyword arguments."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path!r}: {exc}") from exc
    out = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, val = line.partition("=")
        if not eq:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        name = key.strip().replace("-", "_")
        out[name] = _convert(name, val.strip())
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="dpslide",
        description="Private heavy hitters over a sliding window of a stream of item ids.")
    p.add_argument("--config", metavar="FILE", help="key = value file; flags override it")
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--alpha", type=float, help="heavy-hitter threshold in (0, 1)")
    p.add_argument("--epsilon", type=float, help="privacy budget")
    p.add_argument("--delta", type=float, help="privacy slack (L2 mode)")
    p.add_argument("--window", type=int, help="window length W")
    p.add_argument("--n", type=int, help="universe size; item ids lie in [1, n]")
    p.add_argument("--m", type=int, help="stream length (required with --generator)")
    p.add_argument("--kappa", type=float, help="scale on the calibration constants")
    p.add_argument("--kappa-w", type=float, help="scale on the exact-window fallback cutoff")
    p.add_argument("--noise", type=_parse_bool, metavar="BOOL", help="add privacy noise (default true)")
    p.add_argument("--seed", type=int, help="master seed")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--input", help="stream file, or - for stdin")
    src.add_argument("--generator", help="e.g. uniform, zipf:s=1.2, planted:item=7,rho=0.05, all-distinct")
    p.add_argument("--output", help="output file (default stdout)")
    p.add_argument("--trials", type=int, help="repeat over derived seeds and emit metrics")
    p.add_argument("--gap", type=float, help="smooth-histogram gap override")
    p.add_argument("--ams-rows", type=int)
    p.add_argument("--ams-reps", type=int)
    p.add_argument("--cs-rows", type=int)
    p.add_argument("--cs-buckets", type=int)
    p.add_argument("--noise-scale", choices=NOISE_SCALES, help="continual mode noise scale")
    p.add_argument("--failure-exponent", type=float, help="c in the 1/m^c failure target")
    p.add_argument("--timing", type=_parse_bool, metavar="BOOL",
                   help="include wall time (turn off for byte-identical reruns)")
    return p


def config_from_args(argv=None) -> RunConfig:
    args = build_parser().parse_args(argv)
    values = read_config_file(args.config) if args.config else {}
    for name in RunConfig.field_names():
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    # a source given on the command line replaces the file's source
    if args.input is not None:
        values["generator"] = None
    if args.generator is not None:
        values["input"] = None
    try:
        cfg = RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    cfg.validate()
    return cfg


def execute(cfg: RunConfig, out) -> None:
    if cfg.trials > 1 and cfg.mode != "oracle":
        out.write(dumps(run_experiment(cfg)) + "\n")
        return
    stream = load_stream(cfg)
    if cfg.mode == "continual":
        for line in run_continual(cfg, stream):
            out.write(dumps(line) + "\n")
    elif cfg.mode == "oracle":
        out.write(dumps(run_oracle(cfg, stream)) + "\n")
    else:
        out.write(dumps(run_oneshot(cfg, stream)) + "\n")


def main(argv=None) -> int:
    try:
        cfg = config_from_args(argv)
    except SystemExit as exc:       # argparse usage errors
        return EXIT_CONFIG if exc.code else EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if cfg.output:
            with open(cfg.output, "w", encoding="utf-8") as fh:
                execute(cfg, fh)
        else:
            execute(cfg, sys.stdout)
    except (StreamInputError, OSError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        # stream-dependent checks, e.g. a window longer than the file
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
