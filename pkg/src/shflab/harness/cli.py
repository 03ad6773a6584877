"""Command line entry point.

Usage::

    shflab [--config PATH] [--seed N] [--out DIR] [--threads N] [--tol REL] <experiment> [-p KEY=JSON ...]
    shflab schema

Parameters come from the config file's ``params`` object, overridden by
``-p key=value`` pairs whose values are parsed as JSON (bare words are taken
as strings).  Exit codes: 0 success, 2 schema or argument error, 3 numeric
failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from ..errors import ConfigError, DomainError, PreconditionError, SchemaError, ShfLabError
from .config import SCHEMAS, load_config, parse_config, schema_document
from .experiments import run_experiment

EXIT_OK, EXIT_SCHEMA, EXIT_NUMERIC = 0, 2, 3

log = logging.getLogger("shflab")


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _param(text: str):
    key, sep, raw = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="shflab", description="Numerical experiments on the critical 2d stochastic heat flow.")
    ap.add_argument("--config", help="JSON configuration document")
    ap.add_argument("--seed", type=_u64, help="RNG seed (overrides the config)")
    ap.add_argument("--out", default="shflab-out", help="output directory (default: %(default)s)")
    ap.add_argument("--threads", type=_positive_int, help="worker threads")
    ap.add_argument("--tol", type=float, help="relative tolerance for deterministic quadrature")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, metavar="experiment")
    for name, schema in SCHEMAS.items():
        sp = sub.add_parser(name, help=f"run the {name} experiment")
        sp.add_argument(
            "-p", "--param", action="append", type=_param, default=[], metavar="KEY=VALUE",
            help="parameter override; keys: " + ", ".join(schema),
        )
    sub.add_parser("schema", help="print the configuration schema as JSON")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "schema":
        print(json.dumps(schema_document(), indent=2))
        return EXIT_OK
    overrides = {"seed": args.seed, "threads": args.threads, "tol": args.tol}
    try:
        if args.config:
            cfg = load_config(args.config)
            if cfg.experiment != args.command:
                raise SchemaError(f"config is for {cfg.experiment!r}, not {args.command!r}", "experiment")
            doc = {"experiment": cfg.experiment, "seed": cfg.seed, "threads": cfg.threads, "tol": cfg.tol,
                   "params": dict(cfg.params)}
            if cfg.id is not None:
                doc["id"] = cfg.id
        else:
            doc = {"experiment": args.command, "params": {}}
        doc["params"].update(dict(args.param))
        cfg = parse_config(doc, overrides)
        rec = run_experiment(cfg, args.out)
    except (SchemaError, ConfigError, DomainError, PreconditionError) as exc:
        print(f"shflab: configuration error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (ShfLabError, ArithmeticError) as exc:
        print(f"shflab: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"shflab: {exc}", file=sys.stderr)
        return 1
    print(json.dumps({"id": rec.id, "input_hash": rec.input_hash, "out": args.out}))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
