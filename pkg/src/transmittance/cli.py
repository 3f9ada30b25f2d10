"""Command line: ``transmittance run <config>`` and ``transmittance bench``.

Exit codes: 0 when every oracle gate passes, 1 on a gate failure or an
aborted scenario, 2 on a configuration error.
"""

from __future__ import annotations

import argparse
import fnmatch
import re
import sys
from dataclasses import replace
from pathlib import Path

from .harness import ConfigError, builtin_scenarios, emit_csv, load_config, run_scenario, write_pgm

EXIT_OK, EXIT_GATE, EXIT_CONFIG = 0, 1, 2
BUILTIN = "builtin"


def _matches(name: str, pattern: str) -> bool:
    return name == pattern or name.startswith(pattern + "/") or fnmatch.fnmatchcase(name, pattern)


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", text)


def _cmd_run(args) -> int:
    if args.list_builtins:
        for cfg in builtin_scenarios():
            print(cfg.name)
        return EXIT_OK
    if args.config is None:
        print("error: a config path (or 'builtin') is required", file=sys.stderr)
        return EXIT_CONFIG
    try:
        configs = builtin_scenarios() if args.config == BUILTIN else load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.scenario:
        configs = [c for c in configs if any(_matches(c.name, p) for p in args.scenario)]
        if not configs:
            print(f"config error: no scenario matches {args.scenario}", file=sys.stderr)
            return EXIT_CONFIG
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            print("config error: --seed must be a 64-bit unsigned integer", file=sys.stderr)
            return EXIT_CONFIG
        configs = [replace(c, seed=args.seed) for c in configs]

    out = Path(args.out)
    rows, failures = [], []
    for cfg in configs:
        result = run_scenario(cfg, workers=args.workers, backend=args.backend)
        rows.extend(result.rows)
        failures.extend(result.failures)
        status = "FAIL" if result.failures else "ok"
        print(f"{status:4s} {cfg.name} ({len(result)} rows)", file=sys.stderr)
        for label, image in result.images.items():
            path = out.with_name(f"{out.stem}-{_slug(cfg.name)}-{_slug(label)}.pgm")
            write_pgm(image, path)
            print(f"     image {path}", file=sys.stderr)
    emit_csv(rows, out)
    print(f"wrote {out}", file=sys.stderr)
    for f in failures:
        print(f"gate failure: {f}", file=sys.stderr)
    return EXIT_GATE if failures else EXIT_OK


def _cmd_bench(args) -> int:
    from .bench import format_table, run_bench

    print(format_table(run_bench(trials=args.trials)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="transmittance", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run scenarios from a TOML config (or 'builtin')")
    r.add_argument("config", nargs="?", help="TOML path, or 'builtin' for the built-in set")
    r.add_argument("--out", default="results.csv", help="CSV output path (default: results.csv)")
    r.add_argument("--workers", type=int, default=1, help="worker threads (no effect on results)")
    r.add_argument("--seed", type=int, help="override every scenario's seed")
    r.add_argument("--scenario", action="append",
                   help="run only matching scenarios (exact name, name prefix, or glob); repeatable")
    r.add_argument("--list-builtins", action="store_true", help="list built-in scenario names")
    r.add_argument("--backend", choices=("cython", "python"), help="force a kernel backend")
    r.set_defaults(func=_cmd_run)

    b = sub.add_parser("bench", help="compare compiled and pure-Python kernel throughput")
    b.add_argument("--trials", type=int, default=20_000)
    b.set_defaults(func=_cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "workers", 1) < 1:
        print("config error: --workers must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
