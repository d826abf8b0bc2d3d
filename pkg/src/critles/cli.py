"""Command line entry point: ``critles run|verify|sweep``."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, load_config


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--workers", type=int, default=1, help="parallel sweep members")
    p.add_argument("--output-dir", default=None, help="override output.directory")
    p.add_argument("--seed", type=int, default=None, help="override the config seed (u64)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="critles", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="integrate one configured model")
    run.add_argument("config", help="JSON config or run manifest")
    _common(run)

    ver = sub.add_parser("verify", help="run a built-in property suite")
    ver.add_argument("suite", choices=["filter", "identities", "budget", "reduction"])
    _common(ver)

    sw = sub.add_parser("sweep", help="alpha -> 0 limit-consistency sweep")
    sw.add_argument("config", help="JSON config with a 'sweep' section")
    _common(sw)
    return parser


def _load(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError(f"--seed must be a u64, got {args.seed}")
        cfg = cfg.model_copy(update={"seed": args.seed})
    return cfg


def cmd_run(args) -> int:
    from .runner import execute_run

    try:
        cfg = _load(args)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return 2
    res = execute_run(cfg, args.output_dir)
    if not res.ok:
        print(f"run aborted: {res.message} (last valid t={res.last_valid_time:.6g})", file=sys.stderr)
        return 1
    print(f"completed t={res.final_time:.6g}; max budget residual {res.max_budget_residual:.3e}; output in {res.output_dir}")
    return 0


def cmd_verify(args) -> int:
    from .verify import SUITES

    checks = SUITES[args.suite]()
    for c in checks:
        print(c.line())
    failed = [c for c in checks if not c.passed]
    print(f"{args.suite}: {len(checks) - len(failed)}/{len(checks)} passed")
    return 0 if not failed else 1


def cmd_sweep(args) -> int:
    from .runner import execute_sweep

    try:
        cfg = _load(args)
        if cfg.sweep is None:
            raise ConfigError(f"invalid config {args.config}:\n  sweep: missing (required for the sweep command)")
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return 2
    res = execute_sweep(cfg, args.output_dir, workers=args.workers)
    for r in res.records:
        tag = "DIVERGED" if r.diverged else ""
        print(f"alpha={r.alpha:<10g} |w-v|_2={r.error_L2:.6e} |q-p|_2={r.pressure_L2:.6e} {tag}")
    print(f"monotone: {res.monotone}; log-log slopes: {res.slopes}")
    return 0 if res.complete else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    return {"run": cmd_run, "verify": cmd_verify, "sweep": cmd_sweep}[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
