"""Command-line harness.

Subcommands: run (directory benchmark), single (one image plus trace),
diff (absolute-difference map), protocol-check (backend conformance).
Exit codes: 0 ok, 1 config/usage error, 2 data error, 3 backend error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import fields
from pathlib import Path

from . import __version__, bench
from .errors import BackendError, ConfigError, LoopsrError

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_BACKEND = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


_BOOL_KEYS = {"clamp_each_iter", "metrics_8bit", "dump_images", "dump_traces"}
_INT_KEYS = {"scale", "iters", "shave", "jobs"}
_FLOAT_KEYS = {"gain", "request_timeout"}


def _read_config_file(path) -> dict:
    """Flat key=value file; # starts a comment; keys match RunConfig fields."""
    known = {f.name for f in fields(bench.RunConfig)}
    known.add("lambda")
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if not eq or key not in known:
            raise ConfigError(f"{path}:{lineno}: bad config line {raw!r}")
        if key == "lambda":
            key = "gain"
        try:
            if key in _BOOL_KEYS:
                if val.lower() not in ("true", "false"):
                    raise ValueError(val)
                values[key] = val.lower() == "true"
            elif key in _INT_KEYS:
                values[key] = int(val)
            elif key in _FLOAT_KEYS:
                values[key] = float(val)
            else:
                values[key] = val
        except ValueError:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {val!r}") from None
    return values


def _add_run_flags(sub):
    sub.add_argument("--config", help="flat key=value config file")
    sub.add_argument("--output", "-o", dest="output_dir", help="output directory")
    sub.add_argument("--ds", choices=("nearest", "bicubic"))
    sub.add_argument("--cp", help="identity | uniform:<step> | dct:<q>[,sub=<bool>]")
    sub.add_argument("--sr", help="nearest | bilinear | bicubic | external:<command>")
    sub.add_argument("--scale", type=int)
    sub.add_argument("--lambda", dest="gain", type=float,
                     help="feedback gain in (0,1]")
    sub.add_argument("--iters", type=int)
    sub.add_argument("--init", help="serial | zero | random:<seed>")
    sub.add_argument("--clamp-each-iter", dest="clamp_each_iter",
                     action="store_true", default=None)
    sub.add_argument("--metrics-mode", dest="metrics_mode", choices=("rgb", "y"))
    sub.add_argument("--metrics-8bit", dest="metrics_8bit",
                     action="store_true", default=None)
    sub.add_argument("--shave", type=int)
    sub.add_argument("--dump-images", dest="dump_images",
                     action="store_true", default=None)
    sub.add_argument("--dump-traces", dest="dump_traces",
                     action="store_true", default=None)
    sub.add_argument("--jobs", type=int)
    sub.add_argument("--request-timeout", dest="request_timeout", type=float)


def build_parser() -> _Parser:
    parser = _Parser(prog="loopsr", description=__doc__)
    parser.add_argument("--version", action="version",
                        version=f"loopsr {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    run = subs.add_parser("run", help="benchmark a directory of PPM/PGM images")
    run.add_argument("--input", "-i", dest="input_dir", help="image directory")
    _add_run_flags(run)

    single = subs.add_parser("single", help="process one image and dump its trace")
    single.add_argument("image", help="path to a PPM/PGM file")
    _add_run_flags(single)

    diff = subs.add_parser("diff", help="absolute difference of two images")
    diff.add_argument("a")
    diff.add_argument("b")
    diff.add_argument("out")
    diff.add_argument("--gain", type=float, default=1.0,
                      help="difference amplification before writing")

    check = subs.add_parser("protocol-check",
                            help="probe an external SR backend for conformance")
    check.add_argument("backend", help="backend command line (quoted)")
    check.add_argument("--request-timeout", dest="request_timeout",
                       type=float, default=120.0)
    return parser


def resolve_config(args) -> bench.RunConfig:
    """Defaults, then config file, then explicit flags."""
    cfg = bench.RunConfig()
    layered = {}
    if getattr(args, "config", None):
        layered.update(_read_config_file(args.config))
    for f in fields(bench.RunConfig):
        flag_value = getattr(args, f.name, None)
        if flag_value is not None:
            layered[f.name] = flag_value
    for key, value in layered.items():
        setattr(cfg, key, value)
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "run":
            cfg = resolve_config(args)
            if not cfg.input_dir or not cfg.output_dir:
                raise ConfigError("run needs --input and --output")
            summary = bench.run_benchmark(cfg)
            sys.stdout.write(summary.text())
            return EXIT_OK
        if args.command == "single":
            cfg = resolve_config(args)
            _, _, report = bench.run_single(args.image, cfg)
            sys.stdout.write(report)
            return EXIT_OK
        if args.command == "diff":
            bench.diff_images(args.a, args.b, args.out, args.gain)
            return EXIT_OK
        if args.command == "protocol-check":
            passed = bench.protocol_check(args.backend, args.request_timeout)
            return EXIT_OK if passed else EXIT_BACKEND
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except (LoopsrError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
