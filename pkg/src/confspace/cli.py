"""Command-line runner.

::

    confspace run <config> [--workers k] [--out dir]
    confspace list
    confspace describe <tag>
    confspace sample <config> --out points.csv [--potential name]

Exit codes: 0 when every verdict passes (inconclusive verdicts pass with a
warning), 1 on a failed verdict, 2 on a configuration error, 3 when a check
raises during execution. The worker default comes from ``CONFSPACE_WORKERS``.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import sys
import time
from pathlib import Path

from .errors import ConfigError
from .experiment import CATALOG, load_config, run_check
from .sampler import RandomStream, sample_gibbs, sample_poisson
from .verify.laws import default_workers

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    workers = args.workers if args.workers is not None else default_workers()
    started, t0 = _now(), time.perf_counter()

    results, runtimes = [], {}
    for i, check in enumerate(cfg.checks):
        t = time.perf_counter()
        try:
            res = run_check(cfg, check, workers)
        except Exception as exc:  # noqa: BLE001 - any failure inside a check maps to exit 3
            print(f"error in check {i} ({check['label']}): {type(exc).__name__}: {exc}", file=sys.stderr)
            return EXIT_RUNTIME
        runtimes[f"{i}:{res.label}"] = (time.perf_counter() - t) * 1e3
        status = "INCONCLUSIVE" if res.passed and res.inconclusive else ("PASS" if res.passed else "FAIL")
        print(f"[{status}] {res.label}")
        results.append(res)

    warnings = [r.label for r in results if r.passed and r.inconclusive]
    passed = all(r.passed for r in results)
    report = {
        "config": Path(cfg.source).name,
        "seed": cfg.seed,
        "dimension": cfg.dimension,
        "pass": passed,
        "warnings": warnings,
        "checks": [r.payload for r in results],
    }
    (out / "report.json").write_text(_dump(report))
    meta = {
        "started": started,
        "finished": _now(),
        "workers": workers,
        "runtime_ms": (time.perf_counter() - t0) * 1e3,
        "check_runtime_ms": runtimes,
    }
    (out / "report.meta.json").write_text(_dump(meta))
    with open(out / "details.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["check", "label", "identity", "replicate", "lhs_mean", "rhs_mean", "paired_mean"])
        for i, r in enumerate(results):
            for row in r.replicate_rows:
                writer.writerow([i, r.label, r.identity, row["replicate"], repr(row["lhs_mean"]), repr(row["rhs_mean"]), repr(row["paired_mean"])])
    for w in warnings:
        print(f"warning: {w} is inconclusive", file=sys.stderr)
    return EXIT_OK if passed else EXIT_FAIL


def cmd_list(args) -> int:
    for tag, entry in CATALOG.items():
        print(f"{tag:22s} {entry.name}")
    return EXIT_OK


def cmd_describe(args) -> int:
    entry = CATALOG.get(args.tag)
    if entry is None:
        print(f"unknown identity tag {args.tag!r}; see 'confspace list'", file=sys.stderr)
        return EXIT_CONFIG
    print(f"{entry.tag}: {entry.name}")
    print(f"  {entry.statement}")
    print(f"  parameters: {entry.parameters}")
    return EXIT_OK


def cmd_sample(args) -> int:
    try:
        cfg = load_config(args.config)
        if args.potential not in cfg.potentials:
            raise ConfigError(f"--potential: unknown potential {args.potential!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    stream = RandomStream(cfg.seed, ("sample",))
    m = cfg.potentials[args.potential]
    try:
        if m.is_zero:
            gamma = sample_poisson(cfg.intensity, cfg.window, stream)
        else:
            gamma, _ = sample_gibbs(cfg.intensity, m, cfg.window, cfg.chain, stream)
    except Exception as exc:  # noqa: BLE001
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    gamma.to_csv(args.out)
    print(f"wrote {len(gamma)} points to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="confspace", description="Point-process calculus and identity checks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run every check of a manifest")
    p.add_argument("config")
    p.add_argument("--workers", type=int, default=None, help="worker processes (default: $CONFSPACE_WORKERS or 1)")
    p.add_argument("--out", default="confspace-out", help="output directory")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("list", help="list identity tags")
    p.set_defaults(func=cmd_list)

    p = sub.add_parser("describe", help="describe one identity")
    p.add_argument("tag")
    p.set_defaults(func=cmd_describe)

    p = sub.add_parser("sample", help="draw one configuration to CSV")
    p.add_argument("config")
    p.add_argument("--out", required=True)
    p.add_argument("--potential", default="zero", help="named potential from the manifest")
    p.set_defaults(func=cmd_sample)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
