"""Command line front end ``glab``.

Exit codes: 0 success, 2 usage error, 3 schema error (bad body spec or
input file), 4 unsupported body or parameters, 5 a verification verdict
failed.
"""

import argparse
import json
import logging
import sys
import time

from . import harness
from .errors import GlabError, SchemaError
from .measures import to_csv

EXIT_OK, EXIT_USAGE, EXIT_SCHEMA, EXIT_UNSUPPORTED, EXIT_VERDICT = 0, 2, 3, 4, 5


def _scenario_args(p, samples_default):
    p.add_argument("--body", required=True, help="JSON body spec path or built-in name (cube, ball, box, random-zonotope, segment)")
    p.add_argument("--body2", help="second body for discrimination (default: box matched in V_j)")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--j", type=int, required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--samples", type=int, default=samples_default)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--per-atom", type=int, default=1)
    p.add_argument("--ball-pairs", type=int, default=1)
    p.add_argument("--timing", action="store_true", help="print wall-clock time to stderr")


def build_parser():
    ap = argparse.ArgumentParser(prog="glab", description="Flag, Grassmann and direction measures of convex bodies.")
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compute", help="compute a descriptor measure and write it as CSV")
    c.add_argument("descriptor", choices=harness.DESCRIPTORS)
    _scenario_args(c, 20000)
    c.add_argument("--out", required=True, help="CSV path; a JSON sidecar is written to <out>.json")

    v = sub.add_parser("verify", help="check an identity and write a JSON report")
    v.add_argument("identity", choices=harness.IDENTITIES)
    _scenario_args(v, 20000)
    v.add_argument("--z", type=float, default=3.0)
    v.add_argument("--probes", type=int, default=10)
    v.add_argument("--report", help="JSON report path (default: stdout)")

    b = sub.add_parser("bundle", help="summarize all reports in a directory")
    b.add_argument("--dir", required=True)
    b.add_argument("--out", required=True, help="summary path (.json or .csv)")
    return ap


def _scenario(args):
    for name in ("samples", "per_atom", "ball_pairs"):
        if getattr(args, name) < 1:
            raise _Usage(f"--{name.replace('_', '-')} must be positive")
    if getattr(args, "probes", 1) < 1:
        raise _Usage("--probes must be positive")
    return harness.Scenario(
        body=args.body,
        d=args.d,
        j=args.j,
        k=args.k,
        samples=args.samples,
        seed=args.seed,
        z=getattr(args, "z", 3.0),
        probes=getattr(args, "probes", 10),
        per_atom=args.per_atom,
        ball_pairs=args.ball_pairs,
        body2=args.body2,
    )


class _Usage(Exception):
    pass


def _run(args):
    t0 = time.perf_counter()
    code = EXIT_OK
    if args.command == "compute":
        sc = _scenario(args)
        mu = harness.compute(args.descriptor, sc)
        harness.write_text(args.out, to_csv(mu))
        harness.write_text(args.out + ".json", harness.dumps(harness.sidecar(args.descriptor, sc, mu)))
    elif args.command == "verify":
        sc = _scenario(args)
        report = harness.verify(args.identity, sc)
        text = harness.dumps(report)
        if args.report:
            harness.write_text(args.report, text)
        else:
            sys.stdout.write(text)
        print(f"{args.identity}: {report['verdict']}", file=sys.stderr)
        if report["verdict"] != "PASS":
            code = EXIT_VERDICT
    else:
        rows, warnings = harness.bundle(args.dir)
        for w in warnings:
            print(f"warning: {w}", file=sys.stderr)
        if args.out.endswith(".json"):
            harness.write_text(args.out, harness.dumps({"reports": rows}))
        else:
            harness.write_text(args.out, harness.bundle_csv(rows))
    if getattr(args, "timing", False):
        print(f"wall-clock: {time.perf_counter() - t0:.3f} s", file=sys.stderr)
    return code


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except _Usage as exc:
        print(f"glab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SchemaError as exc:
        print(f"glab: schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (GlabError, NotImplementedError) as exc:
        print(f"glab: unsupported: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except (OSError, json.JSONDecodeError) as exc:
        print(f"glab: schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA


if __name__ == "__main__":
    sys.exit(main())
