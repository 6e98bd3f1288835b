"""Command-line interface.

Subcommands mirror the experiment kinds; each loads a JSON config (or an
empty default), injects the subcommand's experiment kind plus any flag
overrides, validates, runs, and exits 0 only when every pass criterion of
the run holds.
"""

import argparse
import json
import sys
from pathlib import Path

from .config import parse_config
from .errors import CoulombTubeError, ConfigError
from .runner import run_experiment, summarize_run


def _base_parser(sub, name, help_text):
    p = sub.add_parser(name, help=help_text)
    p.add_argument("--config", type=Path, default=None, help="JSON config path")
    p.add_argument("--out", type=Path, default=None, help="output directory root")
    p.add_argument("--seed", type=int, default=None, help="override solver seed")
    p.add_argument("--jobs", type=int, default=1, help="parallel rung workers")
    return p


def build_parser():
    ap = argparse.ArgumentParser(
        prog="coulombtube",
        description="Numerical lab for Coulomb operators on shrinking tubes "
                    "and their one-dimensional Dirichlet limits.",
    )
    sub = ap.add_subparsers(dest="command", required=True)
    _base_parser(sub, "modes", "transverse section eigenmodes and C(S)")
    _base_parser(sub, "spectrum-1d", "Dirichlet-wall hydrogen spectrum on the axis")
    _base_parser(sub, "boundary-data", "origin boundary data and extension membership")
    _base_parser(sub, "tube-solve", "assemble a tube operator and apply one resolvent")
    conv = _base_parser(sub, "converge", "resolvent-convergence ladder")
    conv.add_argument("--theorem", choices=("T1", "T2", "P1", "P2"), required=True,
                      help="sweep preset: attractive norm (T1), repulsive strong (T2), "
                           "inverse pairing (P1), shifted pairing (P2)")
    _base_parser(sub, "klaus", "potential checklist for the Dirichlet limit")
    _base_parser(sub, "qeps", "energy-control double integral ladder")
    _base_parser(sub, "gamma", "variational trials on the ground sector")
    rep = sub.add_parser("report", help="summarize a finished run directory")
    rep.add_argument("run_dir", type=Path, help="run directory (with manifest.json)")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "report":
        try:
            lines, ok = summarize_run(args.run_dir)
        except CoulombTubeError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        print("\n".join(lines))
        return 0 if ok else 1

    doc = {}
    if args.config is not None:
        doc = json.loads(args.config.read_text())
    doc["experiment"] = args.command
    if args.command == "converge":
        doc["theorem"] = args.theorem
    if args.seed is not None:
        doc.setdefault("solver", {})["seed"] = args.seed
    try:
        config = parse_config(doc)
    except ConfigError as exc:
        print("config invalid:", file=sys.stderr)
        for v in exc.violations:
            print(f"  - {v}", file=sys.stderr)
        return 2
    try:
        manifest, status = run_experiment(config, out_dir=args.out, jobs=args.jobs)
    except CoulombTubeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    run_dir = Path(args.out if args.out is not None else config.output["directory"])
    print(f"run {manifest['experiment_id']} pass={manifest['pass']} "
          f"-> {run_dir / manifest['experiment_id']}")
    return status


if __name__ == "__main__":
    sys.exit(main())
