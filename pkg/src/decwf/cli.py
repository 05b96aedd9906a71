"""Command line: ``decwf ceremony | run | verify-trace``.

Exit codes are the same for every subcommand: 0 when everything passes, 1
when an invariant is violated, 2 for usage, validation or parse errors.
Output files go to ``--out``/``--trace`` or, when those are relative or
absent, under ``$DECWF_OUT_DIR`` (default: the working directory).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from decwf.errors import ConfigError, DecwfError, PolicyError, TraceFormatError

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2
OUT_ENV = "DECWF_OUT_DIR"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def out_dir() -> Path:
    return Path(os.environ.get(OUT_ENV) or ".")


def _place(path) -> Path:
    p = Path(path)
    return p if p.is_absolute() else out_dir() / p


def _table(rows, headers) -> str:
    cols = [headers] + [[str(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cols) for i in range(len(headers))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in cols]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


# ceremony


def cmd_ceremony(args) -> int:
    from decwf.ceremony import ceremony

    weights = None
    try:
        if args.weights:
            weights = [int(w) for w in args.weights.split(",")]
        names = args.names.split(",") if args.names else None
    except ValueError:
        print("error: --weights must be comma-separated integers", file=sys.stderr)
        return EXIT_USAGE
    seed = args.seed.encode() if args.seed is not None else None
    try:
        out = ceremony(args.parties, args.threshold, weights, args.profile, _place(args.out), names, seed)
    except PolicyError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    shares = sum(len(w) for w in out.vks.policy.allocation().values())
    rec = {
        "ceremony": out.vks.dealing_id,
        "participants": len(out.share_files),
        "shares": shares,
        "threshold": args.threshold,
        "profile": args.profile,
        "public": str(out.public_file),
    }
    print(json.dumps(rec, sort_keys=True))
    print(f"wrote {len(out.share_files)} share files and {out.public_file.name} to {out.directory}")
    return EXIT_OK


# run


def _trace_path(template: str, scenario: str, variant: str, seed: int, many: bool) -> Path:
    if "{" in template:
        name = template.format(scenario=scenario, variant=variant, seed=seed)
    elif many:
        p = Path(template)
        name = str(p.with_name(f"{p.stem}-{variant}-{seed}{p.suffix or '.trace'}"))
    else:
        name = template
    return _place(name)


def cmd_run(args) -> int:
    from decwf.scenario import load_scenario, parse_seeds, resolve

    try:
        doc_path = resolve(args.scenario)
        sc = load_scenario(doc_path)
        if args.profile:
            from decwf.crypto_core import PROFILES

            if args.profile not in PROFILES:
                raise ConfigError(f"unknown profile {args.profile!r}; choose from {sorted(PROFILES)}")
            sc.profile = args.profile
        if args.suite:
            from decwf.simnet import SUITES

            if args.suite not in SUITES:
                raise ConfigError(f"unknown suite {args.suite!r}; choose from {sorted(SUITES)}")
            sc.suite = args.suite
        if args.seed is not None:
            seeds = [args.seed]
        elif args.seeds is not None:
            seeds = parse_seeds(args.seeds)
        else:
            seeds = sc.seeds
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    jobs = [(v, s) for v in sc.variants for s in seeds]
    many = len(jobs) > 1

    def one(job):
        v, s = job
        o = sc.run(s, v)
        if args.trace:
            path = _trace_path(args.trace, sc.name, v.name, s, many)
            path.parent.mkdir(parents=True, exist_ok=True)
            o.trace.write(path)
        # keep only the summary; traces can be large
        return o.variant, o.seed, o.status, o.rows()

    try:
        if args.workers > 1 and many:
            with ThreadPoolExecutor(args.workers) as pool:
                results = list(pool.map(one, jobs))
        else:
            results = [one(j) for j in jobs]
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    stats = defaultdict(lambda: [0, 0, 0])  # name -> runs, failed runs, violations
    statuses = defaultdict(int)
    failures = []
    for variant, seed, status, rows in results:
        statuses[status] += 1
        for name, viol in rows:
            st = stats[name]
            st[0] += 1
            if viol:
                st[1] += 1
                st[2] += len(viol)
                failures.append((variant, seed, name, viol[0]))
    for name in sorted(stats):
        runs, bad, nviol = stats[name]
        rec = {"scenario": sc.name, "invariant": name, "status": "fail" if bad else "pass", "runs": runs,
               "failed_runs": bad, "violations": nviol}
        print(json.dumps(rec, sort_keys=True))
    print()
    rows = [(n, "FAIL" if stats[n][1] else "pass", stats[n][0], stats[n][1]) for n in sorted(stats)]
    print(_table(rows, ("invariant", "result", "runs", "failed")))
    print(f"{len(results)} runs ({len(sc.variants)} variants x {len(seeds)} seeds); outcomes: "
          + ", ".join(f"{k}={v}" for k, v in sorted(statuses.items())))
    for variant, seed, name, first in failures[:10]:
        print(f"violation: variant={variant} seed={seed} {name}: {first}", file=sys.stderr)
    return EXIT_VIOLATION if failures else EXIT_OK


# verify-trace


def cmd_verify(args) -> int:
    from decwf.simnet import Trace, check_trace

    try:
        trace = Trace.read(args.trace)
        if not trace.complete:
            raise TraceFormatError("trace has no end record (truncated?)")
        report = check_trace(trace, args.suite)
    except FileNotFoundError:
        print(f"error: no such trace file {args.trace}", file=sys.stderr)
        return EXIT_USAGE
    except TraceFormatError as e:
        print(f"error: malformed trace: {e}", file=sys.stderr)
        return EXIT_USAGE
    for rec in report.to_records():
        print(json.dumps(rec, sort_keys=True))
    print()
    rows = [(r.name, "pass" if r.passed else "FAIL", len(r.violations)) for r in report.results]
    print(_table(rows, ("invariant", "result", "violations")))
    print(f"{len(trace)} records checked")
    for r in report.results:
        for v in r.violations[:5]:
            print(f"violation: {r.name}: {v}", file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_VIOLATION


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="decwf", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    c = sub.add_parser("ceremony", help="deal threshold key shares and write them out")
    c.add_argument("--parties", "-n", type=int, required=True)
    c.add_argument("--threshold", "-k", type=int, required=True)
    c.add_argument("--weights", help="comma-separated share counts, one per party")
    c.add_argument("--names", help="comma-separated party names (default p1..pn)")
    c.add_argument("--profile", default="toy")
    c.add_argument("--out", default="ceremony", help="output directory")
    c.add_argument("--seed", help="make the dealing deterministic (testing only)")
    c.set_defaults(fn=cmd_ceremony)

    r = sub.add_parser("run", help="run a scenario and check its invariants")
    r.add_argument("--scenario", required=True, help="scenario file or bundled scenario name")
    g = r.add_mutually_exclusive_group()
    g.add_argument("--seed", type=int)
    g.add_argument("--seeds", help="seed range like 0-199, or a comma list")
    r.add_argument("--trace", help="trace file; {scenario}, {variant}, {seed} are substituted")
    r.add_argument("--profile")
    r.add_argument("--suite")
    r.add_argument("--workers", type=int, default=1)
    r.set_defaults(fn=cmd_run)

    v = sub.add_parser("verify-trace", help="check a trace file offline")
    v.add_argument("--trace", required=True)
    v.add_argument("--suite", default="all")
    v.set_defaults(fn=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except DecwfError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
