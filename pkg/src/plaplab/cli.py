"""Command-line front door.

Subcommands run partial pipelines so the individual stages are
testable on their own:

    plaplab check     --config cfg.toml            hypothesis/condition gates
    plaplab eig       --config cfg.toml            first eigenpair only
    plaplab subsol    --config cfg.toml            through the sub-solution
    plaplab solve     --config cfg.toml --out DIR  full pipeline + artifacts
    plaplab report    --config cfg.toml --out DIR  alias of solve
    plaplab measure-lab --out DIR                  measure-theory demonstrations

Exit codes: 0 all gates pass, 2 gate failure (report written), 1 hard error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .config import ConfigError, parse_config
from .pipeline import run_measure_lab, run_pipeline, write_outputs

_STOP = {"check": "conditions", "eig": "eigenpair", "subsol": "subsolution"}


def _build_parser():
    ap = argparse.ArgumentParser(
        prog="plaplab",
        description="Numerical laboratory for singular p-Laplacian problems "
        "with discontinuous convection terms",
    )
    ap.add_argument(
        "command",
        choices=["check", "eig", "subsol", "solve", "report", "measure-lab"],
        help="pipeline stage to run",
    )
    ap.add_argument("--config", help="TOML run configuration")
    ap.add_argument("--out", default=None, help="output directory")
    ap.add_argument("--seed", type=int, default=None, help="override run.seed")
    ap.add_argument(
        "--validation-mode",
        action="store_true",
        help="override run.validation_mode (unlock p >= 2 oracle runs)",
    )
    return ap


def main(argv=None):
    args = _build_parser().parse_args(argv)

    if args.command == "measure-lab":
        out = args.out or "out"
        records = run_measure_lab(out, seed=args.seed or 0)
        ok = (
            all(r["passed"] for r in records["null_projection"]["runs"])
            and records["plateau_locality"]["hypothesis_met"]
            and records["plateau_locality"]["pass_fraction"] >= 0.99
        )
        print(json.dumps(records, indent=1, sort_keys=True))
        return 0 if ok else 2

    if not args.config:
        print("error: --config is required for this command", file=sys.stderr)
        return 1
    try:
        cfg = parse_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    if args.seed is not None:
        cfg.seed = args.seed
    if args.validation_mode:
        cfg.validation_mode = True
    if args.out is not None:
        cfg.output_dir = args.out

    try:
        report = run_pipeline(cfg, stop_after=_STOP.get(args.command))
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    for gate in report.gates:
        mark = "PASS" if gate.passed else "FAIL"
        print(f"[{mark}] {gate.name}")
    if args.command in ("solve", "report"):
        manifest = write_outputs(report, cfg.output_dir)
        print(f"wrote {len(manifest['files'])} artifacts to {cfg.output_dir}/")
    if args.command == "eig" and report.eig is not None:
        print(f"lambda1 = {report.eig.lambda1!r}")
    print(f"status: {report.status}")
    return 0 if report.all_passed else 2


if __name__ == "__main__":
    sys.exit(main())
